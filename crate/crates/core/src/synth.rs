//! Synthetic union-of-subspaces benchmarks and the corruption engine.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::LabelVector;
use crate::types::{DataMatrix, ObservationMask};

/// Attempts at drawing a point-to-subspace assignment for model II.
pub const MAX_ASSIGNMENT_ATTEMPTS: usize = 100;

/// Everything the generator knows that the solver does not.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub labels: LabelVector,
    pub clean: DataMatrix,
    /// `true` where an additive error was injected.
    pub error_mask: DMatrix<bool>,
    /// `true` where the entry was erased.
    pub erasure_mask: DMatrix<bool>,
    /// Orthonormal basis (`D × d_l`) of each subspace.
    pub bases: Vec<DMatrix<f64>>,
}

/// Corruption parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub p_err: f64,
    pub p_ers: f64,
    /// Signal-to-noise ratio in dB; noise std is `rms(Y)·10^(−dB/20)`.
    pub noise_db: Option<f64>,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn clean(seed: u64) -> Self {
        CorruptionSpec { p_err: 0.0, p_ers: 0.0, noise_db: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_err", self.p_err), ("p_ers", self.p_ers)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Injected corruption, to be merged into a [`GroundTruth`].
#[derive(Debug, Clone)]
pub struct CorruptionRecord {
    pub error_mask: DMatrix<bool>,
    pub erasure_mask: DMatrix<bool>,
    /// The dense noise that was added (zero on erased entries).
    pub noise: DMatrix<f64>,
}

impl GroundTruth {
    pub fn with_corruption(mut self, record: &CorruptionRecord) -> Self {
        self.error_mask = record.error_mask.clone();
        self.erasure_mask = record.erasure_mask.clone();
        self
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal `n × n` matrix (QR of a Gaussian matrix with
/// the signs of `diag(R)` folded into `Q`).
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    orthonormal_columns(n, n, rng)
}

/// `D × d` matrix with orthonormal columns spanning a uniformly random subspace.
pub fn orthonormal_columns(d: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let qr = gaussian(d, cols, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn points_on(basis: &DMatrix<f64>, count: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    basis * gaussian(basis.ncols(), count, rng)
}

/// Builds the three model-I bases in coordinates before the global rotation.
///
/// `e₁¹, e₁², e₁³` lie in one 2-plane at angles `θ, θ, 2θ`; `e₂, e₃, e₄` of the
/// first two spaces are six orthonormal vectors and those of the third space
/// are `(e_j¹ + e_j²)/√2`.
pub fn model1_bases(theta_deg: f64, ambient: usize) -> Vec<DMatrix<f64>> {
    assert!(ambient >= 8, "model I needs at least 8 ambient dimensions");
    let t = theta_deg.to_radians();
    let unit = |k: usize| {
        let mut v = nalgebra::DVector::zeros(ambient);
        v[k] = 1.0;
        v
    };
    let plane = |angle: f64| unit(0) * angle.cos() + unit(1) * angle.sin();
    let first = [plane(0.0), plane(t), plane(2.0 * t)];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..3)
        .map(|l| {
            let mut b = DMatrix::zeros(ambient, 4);
            b.set_column(0, &first[l]);
            for j in 0..3 {
                let (u, v) = (unit(2 + 2 * j), unit(3 + 2 * j));
                let col = match l {
                    0 => u,
                    1 => v,
                    _ => (u + v) * s,
                };
                b.set_column(j + 1, &col);
            }
            b
        })
        .collect()
}

/// Model I: 3 four-dimensional linear subspaces of `R^50`, each inside the sum
/// of the other two, `n_per_space` points each, columns grouped by subspace.
pub fn gen_model1(theta_deg: f64, n_per_space: usize, seed: u64) -> Result<(DataMatrix, GroundTruth)> {
    const D: usize = 50;
    if !(0.0..=60.0).contains(&theta_deg) {
        return Err(Error::InvalidConfig(format!("θ = {theta_deg}° outside [0, 60]")));
    }
    if n_per_space < 5 {
        return Err(Error::InvalidConfig("need at least 5 points per subspace".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = model1_bases(theta_deg, D);
    let mut y = DMatrix::zeros(D, 3 * n_per_space);
    for (l, basis) in raw.iter().enumerate() {
        let pts = points_on(basis, n_per_space, &mut rng);
        y.columns_mut(l * n_per_space, n_per_space).copy_from(&pts);
    }
    let rotation = random_orthogonal(D, &mut rng);
    let y = &rotation * y;
    let bases = raw.iter().map(|b| &rotation * b).collect();
    let labels = LabelVector((0..3 * n_per_space).map(|j| j / n_per_space).collect());
    finish(y, labels, bases)
}

/// Model II: `k` subspaces of uniformly random orientation and dimension in
/// `dims.0..=dims.1`; `n` points assigned uniformly at random, re-drawn until
/// every subspace holds more points than its dimension.
pub fn gen_model2(
    ambient: usize,
    k: usize,
    dims: (usize, usize),
    n: usize,
    seed: u64,
) -> Result<(DataMatrix, GroundTruth)> {
    let (lo, hi) = dims;
    if lo < 1 || lo > hi || hi > ambient || k < 1 {
        return Err(Error::InvalidConfig(format!(
            "bad model II shape: D={ambient}, K={k}, dims {lo}..={hi}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sub_dims: Vec<usize> = (0..k).map(|_| rng.random_range(lo..=hi)).collect();
    let bases: Vec<DMatrix<f64>> =
        sub_dims.iter().map(|&d| orthonormal_columns(ambient, d, &mut rng)).collect();
    let assignment = (0..MAX_ASSIGNMENT_ATTEMPTS)
        .map(|_| (0..n).map(|_| rng.random_range(0..k)).collect::<Vec<_>>())
        .find(|a| (0..k).all(|l| a.iter().filter(|&&x| x == l).count() > sub_dims[l]))
        .ok_or(Error::InfeasibleAssignment { attempts: MAX_ASSIGNMENT_ATTEMPTS })?;
    let mut y = DMatrix::zeros(ambient, n);
    for (j, &l) in assignment.iter().enumerate() {
        let coeffs = gaussian(sub_dims[l], 1, &mut rng);
        y.set_column(j, &(&bases[l] * coeffs).column(0));
    }
    finish(y, LabelVector(assignment), bases)
}

fn finish(y: DMatrix<f64>, labels: LabelVector, bases: Vec<DMatrix<f64>>) -> Result<(DataMatrix, GroundTruth)> {
    let (d, n) = y.shape();
    let data = DataMatrix::new(y)?;
    let truth = GroundTruth {
        labels,
        clean: data.clone(),
        error_mask: DMatrix::from_element(d, n, false),
        erasure_mask: DMatrix::from_element(d, n, false),
        bases,
    };
    Ok((data, truth))
}

/// Root mean square of all entries.
pub fn rms(y: &DMatrix<f64>) -> f64 {
    (y.norm_squared() / y.len() as f64).sqrt()
}

/// Independently per entry: erase with probability `p_ers` (value zeroed,
/// reported in the mask); otherwise add a standard-normal error with
/// probability `p_err` (not reported). Optional Gaussian noise is then added
/// to every surviving entry.
pub fn corrupt(y: &DataMatrix, spec: &CorruptionSpec) -> Result<(DataMatrix, ObservationMask, CorruptionRecord)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (d, n) = (y.dim(), y.len());
    let mut out = y.values().clone();
    let mut erased = DMatrix::from_element(d, n, false);
    let mut errors = DMatrix::from_element(d, n, false);
    for j in 0..n {
        for i in 0..d {
            if rng.random::<f64>() < spec.p_ers {
                erased[(i, j)] = true;
                out[(i, j)] = 0.0;
            } else if rng.random::<f64>() < spec.p_err {
                errors[(i, j)] = true;
                out[(i, j)] += rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let mut noise = DMatrix::zeros(d, n);
    if let Some(db) = spec.noise_db {
        let sigma = rms(y.values()) * 10f64.powf(-db / 20.0);
        for j in 0..n {
            for i in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                if !erased[(i, j)] {
                    noise[(i, j)] = sigma * z;
                }
            }
        }
        out += &noise;
    }
    let mask = ObservationMask::from_matrix(erased.map(|e| !e));
    Ok((DataMatrix::new(out)?, mask, CorruptionRecord { error_mask: errors, erasure_mask: erased, noise }))
}
