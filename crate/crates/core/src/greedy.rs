//! Greedy re-qualification of suspected errors as erasures.
//!
//! Entries whose error estimate `|E_ij|` exceeds a decreasing threshold `M`
//! are removed from `Ω`; afterwards they are treated like erasures. GSSC does
//! this between full SSC solves, FGSSC inside the ADMM iteration.

use nalgebra::DMatrix;

use crate::admm::{ssc_solve_raw, Admm, IterationView, Residuals, SscOutput};
use crate::error::{Error, Result};
use crate::params::lambdas_raw;
use crate::types::{CoefficientMatrix, CorrectionRule, DataMatrix, GreedyConfig, ObservationMask, SolverConfig};

/// One greedy step.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyRecord {
    /// ADMM iteration (FGSSC) or outer pass (GSSC).
    pub k: usize,
    pub threshold: f64,
    pub pruned_count: usize,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GreedyTrace {
    pub records: Vec<GreedyRecord>,
}

impl GreedyTrace {
    pub fn total_pruned(&self) -> usize {
        self.records.iter().map(|r| r.pruned_count).sum()
    }
}

/// Result of [`fgssc_solve`].
#[derive(Debug, Clone)]
pub struct FgsscOutput {
    pub coefficients: CoefficientMatrix,
    /// `Ω` after pruning.
    pub mask: ObservationMask,
    pub iterations: usize,
    pub converged: bool,
    pub trace: GreedyTrace,
}

/// Result of [`gssc_solve`]; `ssc` is the final inner solve.
#[derive(Debug, Clone)]
pub struct GsscOutput {
    pub c_star: DMatrix<f64>,
    pub y_out: DMatrix<f64>,
    pub mask: ObservationMask,
    pub trace: GreedyTrace,
    pub ssc: SscOutput,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `max_j median(|y_j|)` over the columns of `y`.
pub fn max_column_median(y: &DMatrix<f64>) -> f64 {
    y.column_iter()
        .map(|c| median(&mut c.iter().map(|v| v.abs()).collect::<Vec<_>>()))
        .fold(0.0, f64::max)
}

/// Median of `|y_ij|` over trusted entries only.
pub fn trusted_median(y: &DMatrix<f64>, mask: &ObservationMask) -> f64 {
    let mut vals: Vec<f64> = y
        .iter()
        .zip(mask.values().iter())
        .filter(|(_, &t)| t)
        .map(|(v, _)| v.abs())
        .collect();
    median(&mut vals)
}

/// Removes every trusted `(i, j)` with `score_ij > threshold`; returns the count.
pub fn prune(mask: &mut ObservationMask, score: &DMatrix<f64>, threshold: f64) -> usize {
    let (rows, cols) = mask.shape();
    let mut removed = 0;
    for j in 0..cols {
        for i in 0..rows {
            if score[(i, j)] > threshold && mask.untrust(i, j) {
                removed += 1;
            }
        }
    }
    removed
}

fn check_exhaustion(mask: &ObservationMask, initial: usize, limit: f64) -> Result<()> {
    let removed = initial - mask.trusted_count();
    if initial > 0 && removed as f64 > limit * initial as f64 {
        return Err(Error::MaskExhausted { removed, total: initial });
    }
    Ok(())
}

/// Applies the data correction after an even iteration and resets `E` accordingly.
pub fn correct_data(
    y: &DMatrix<f64>,
    e: &mut DMatrix<f64>,
    omega: &ObservationMask,
    rule: CorrectionRule,
) -> DMatrix<f64> {
    let apply_on_trusted = rule == CorrectionRule::SubtractTrusted;
    let corrected = y.zip_zip_map(e, omega.values(), |v, err, t| if t == apply_on_trusted { v - err } else { v });
    match rule {
        CorrectionRule::SubtractTrusted => e.fill(0.0),
        CorrectionRule::FillUntrusted => e.zip_apply(omega.values(), |err, t| {
            if !t {
                *err = 0.0;
            }
        }),
    }
    corrected
}

/// GSSC: repeated SSC solves, each followed by pruning `Ω` and filling the
/// newly untrusted entries of the data with the error-compensated output.
pub fn gssc_solve(y: &DataMatrix, mask: &ObservationMask, config: &SolverConfig) -> Result<GsscOutput> {
    mask.check_shape(y)?;
    config.validate()?;
    let greedy = config.greedy_or_default();
    let initial = mask.trusted_count();

    let original = y.masked(mask);
    let mx_med = max_column_median(&original);
    let mut yk = original;
    let mut omega = mask.clone();
    let mut threshold: Option<f64> = None;
    let mut trace = GreedyTrace::default();
    let mut last = None;

    for pass in 0..greedy.outer_iter {
        let out = ssc_solve_raw(yk.clone(), &omega, config, &mut |_| {})?;
        let err = (&out.y_out - &yk).abs();
        let m = threshold.get_or_insert_with(|| (greedy.alpha1 * err.max()).max(greedy.alpha2 * mx_med));
        *m *= greedy.beta;
        let pruned = prune(&mut omega, &err, *m);
        check_exhaustion(&omega, initial, greedy.max_prune_fraction)?;
        trace.records.push(GreedyRecord {
            k: pass,
            threshold: *m,
            pruned_count: pruned,
            residuals: out.residuals,
        });
        yk = yk.zip_zip_map(&out.y_out, omega.values(), |cur, fill, t| if t { cur } else { fill });
        last = Some(out);
    }

    let ssc = last.expect("outer_iter is validated positive");
    Ok(GsscOutput {
        c_star: ssc.c_star.clone(),
        y_out: ssc.y_out.clone(),
        mask: omega,
        trace,
        ssc,
    })
}

/// FGSSC: the SSC iteration with greedy pruning of `Ω` fused in.
///
/// For `k < k0` nothing is pruned. At `k = k0` the threshold becomes
/// `M = α₀‖E‖_∞` (raised to the floor below when `floor_at_k0` is set); on later even iterations `M ← max(α₁M, α₂·med)` where
/// `med` is the median magnitude of the initially trusted entries. Before
/// each A-update, trusted entries with `|E_ij| > M` leave `Ω`. After every
/// even iteration the trusted part of the error estimate is subtracted from
/// the data and `E` restarts from zero.
pub fn fgssc_solve(y: &DataMatrix, mask: &ObservationMask, config: &SolverConfig) -> Result<FgsscOutput> {
    fgssc_solve_observed(y, mask, config, &mut |_| {})
}

/// [`fgssc_solve`] with a callback after every iteration.
pub fn fgssc_solve_observed(
    y: &DataMatrix,
    mask: &ObservationMask,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> Result<FgsscOutput> {
    mask.check_shape(y)?;
    config.validate()?;
    let Some(greedy) = config.greedy.clone() else {
        let out = crate::admm::ssc_solve_observed(y, mask, config, observer)?;
        return Ok(FgsscOutput {
            coefficients: CoefficientMatrix(out.c_star),
            mask: mask.clone(),
            iterations: out.iterations,
            converged: out.converged,
            trace: GreedyTrace::default(),
        });
    };

    let data = y.masked(mask);
    let (lambda_e, lambda_z) = lambdas_raw(config, &data)?;
    let mx_med = trusted_median(&data, mask);
    let mut omega = mask.clone();
    let initial = omega.trusted_count();
    let mut admm = Admm::new(data, config, lambda_e, lambda_z)?;
    let mut threshold = f64::INFINITY;
    let mut trace = GreedyTrace::default();
    let mut converged = false;
    let mut iterations = 0;
    let GreedyConfig { k0, alpha0, alpha1, alpha2, .. } = greedy;

    while iterations < config.max_iter {
        let k = admm.state.k;
        if k == k0 {
            threshold = alpha0 * admm.state.e.amax();
            if greedy.floor_at_k0 {
                threshold = threshold.max(alpha2 * mx_med);
            }
        } else if k > k0 && k % 2 == 0 {
            threshold = (alpha1 * threshold).max(alpha2 * mx_med);
        }
        let pruned = if threshold.is_finite() {
            prune(&mut omega, &admm.state.e.abs(), threshold)
        } else {
            0
        };
        check_exhaustion(&omega, initial, greedy.max_prune_fraction)?;

        let residuals = admm.step(&omega)?;
        iterations += 1;
        converged = residuals.below(config.epsilon);
        if threshold.is_finite() {
            trace.records.push(GreedyRecord { k, threshold, pruned_count: pruned, residuals });
        }
        observer(&IterationView {
            state: &admm.state,
            mask: &omega,
            residuals: &residuals,
            threshold: threshold.is_finite().then_some(threshold),
            pruned,
        });

        if k % 2 == 0 && !converged {
            let corrected = correct_data(&admm.y, &mut admm.state.e, &omega, greedy.correction);
            if greedy.refresh_mu && (config.lambda_e.is_none() || config.lambda_z.is_none()) {
                let masked = corrected.zip_map(omega.values(), |v, t| if t { v } else { 0.0 });
                let (le, lz) = lambdas_raw(config, &masked)?;
                admm.set_lambdas(le, lz)?;
            }
            admm.replace_data(corrected)?;
        }
        admm.advance();
        if converged {
            break;
        }
    }

    let mut c = admm.state.c;
    c.fill_diagonal(0.0);
    Ok(FgsscOutput {
        coefficients: CoefficientMatrix(c),
        mask: omega,
        iterations,
        converged,
        trace,
    })
}

/// Which parameter table to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleModel {
    ModelISsc,
    ModelIFgssc,
    /// Random-subspace model in ambient dimension `D`.
    ModelII(usize),
}

/// `(α_e, α_z)` for a benchmark model at erasure probability `p_ers`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alphas {
    pub alpha_e: f64,
    pub alpha_z: f64,
}

/// Erasure-dependent penalty schedule.
///
/// Model I interpolates `α_e` linearly over `p_ers ∈ [0, 0.7]` (5 → 24 for
/// SSC with `α_z = 7`, 11 → 22 for FGSSC with `α_z = 20`). Model II uses
/// `α_e = β₁ + β₂p`, `α_z = γ₁ + γ₂p²` with tabulated coefficients for
/// `D ∈ {15, 25, 50}`.
pub fn schedule_alphas(p_ers: f64, model: ScheduleModel) -> Result<Alphas> {
    if !(0.0..=1.0).contains(&p_ers) {
        return Err(Error::InvalidConfig(format!("p_ers = {p_ers} outside [0, 1]")));
    }
    let lerp = |lo: f64, hi: f64| lo + (hi - lo) * p_ers / 0.7;
    Ok(match model {
        ScheduleModel::ModelISsc => Alphas { alpha_e: lerp(5.0, 24.0), alpha_z: 7.0 },
        ScheduleModel::ModelIFgssc => Alphas { alpha_e: lerp(11.0, 22.0), alpha_z: 20.0 },
        ScheduleModel::ModelII(d) => {
            let (b1, b2, g1, g2) = match d {
                15 => (5.0, 36.0, 0.7, 29.0),
                25 => (5.0, 22.0, 0.8, 10.8),
                50 => (7.0, 18.0, 3.0, 6.8),
                other => return Err(Error::UnknownModel(other)),
            };
            Alphas { alpha_e: b1 + b2 * p_ers, alpha_z: g1 + g2 * p_ers * p_ers }
        }
    })
}

/// `α_e` alone; see [`schedule_alphas`].
pub fn schedule_alpha_e(p_ers: f64, model: ScheduleModel) -> Result<f64> {
    Ok(schedule_alphas(p_ers, model)?.alpha_e)
}
