//! Erasure-aware SSC via ADMM.
//!
//! Minimizes
//!
//! ```text
//! ‖C‖₁ + λ_e‖χ_Ω ⊙ E‖₁ + λ_z/2 ‖Y − YA − E‖²_F
//!   s.t. A = C − diag(C)  (and Aᵀ𝟙 = 𝟙 for affine subspaces)
//! ```
//!
//! by cycling A → C → E → (δ, Δ) with a geometrically growing penalty `ρ`.
//! The `N × N` A-system is never formed; see [`AUpdateSolver`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::params::lambdas_raw;
use crate::shrink::shrink;
use crate::types::{ASolveStrategy, DataMatrix, ObservationMask, SolverConfig, SolverState};

/// Reciprocal condition estimates below this are treated as singular.
pub const RCOND_THRESHOLD: f64 = 1e-14;

/// Result of [`ssc_solve`].
#[derive(Debug, Clone)]
pub struct SscOutput {
    /// Converged coefficient matrix `C*`, zero diagonal.
    pub c_star: DMatrix<f64>,
    /// Error-compensated data `Y − E`.
    pub y_out: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Stopping residuals of the final iteration.
    pub residuals: Residuals,
}

/// The four max-norm stopping residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `‖Aᵀ𝟙 − 𝟙‖_∞`, affine mode only.
    pub affine: Option<f64>,
    /// `‖A − C‖_∞`.
    pub split: f64,
    /// `‖A − A_prev‖_∞`.
    pub a_change: f64,
    /// `‖E − E_prev‖_∞`.
    pub e_change: f64,
}

impl Residuals {
    pub fn between(prev: &SolverState, new: &SolverState, affine: bool) -> Self {
        Residuals {
            affine: affine.then(|| max_abs_iter(column_sums(&new.a).iter().map(|s| s - 1.0))),
            split: max_abs_diff(&new.a, &new.c),
            a_change: max_abs_diff(&new.a, &prev.a),
            e_change: max_abs_diff(&new.e, &prev.e),
        }
    }

    /// Strict `< ε` on every active residual.
    pub fn below(&self, epsilon: f64) -> bool {
        self.affine.is_none_or(|r| r < epsilon)
            && self.split < epsilon
            && self.a_change < epsilon
            && self.e_change < epsilon
    }
}

/// Snapshot handed to an iteration observer after each ADMM step.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub state: &'a SolverState,
    pub mask: &'a ObservationMask,
    pub residuals: &'a Residuals,
    /// Current pruning threshold (greedy solvers only).
    pub threshold: Option<f64>,
    /// Entries removed from `Ω` just before this step.
    pub pruned: usize,
}

fn max_abs_iter(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |m, v| m.max(v.abs()))
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs_iter(a.iter().zip(b.iter()).map(|(x, y)| x - y))
}

fn column_sums(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(a.ncols(), a.column_iter().map(|c| c.sum()))
}

enum Factor {
    /// `Q = V + ỸỸᵀ` and its Cholesky factor, for the current `ρ`.
    Woodbury {
        ytilde: DMatrix<f64>,
        gram: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
    /// `YᵀY = U Λ Uᵀ`; `(λ_z YᵀY + ρI)⁻¹ = U (λ_z Λ + ρ)⁻¹ Uᵀ` for any `ρ`.
    Eigen {
        vectors: DMatrix<f64>,
        values: DVector<f64>,
    },
}

/// Solver for `(λ_z YᵀY + ρI + ρ𝟙𝟙ᵀ) A = R` (the `𝟙𝟙ᵀ` term in affine mode only).
///
/// With `Ỹ = Y` (linear) or `Ỹ = [Y; 𝟙ᵀ]` (affine) and `V = diag(ρ/λ_z, …, ρ/λ_z[, 1])`,
/// the push-through identity gives
///
/// ```text
/// (λ_z YᵀY + ρI + ρ𝟙𝟙ᵀ)⁻¹ = ρ⁻¹ (I − Ỹᵀ Q⁻¹ Ỹ),   Q = V + ỸỸᵀ,
/// ```
///
/// so only a `D × D` (or `(D+1) × (D+1)`) system is factored. When `D ≥ N`
/// the eigen route factors `YᵀY` once per data matrix instead and handles the
/// affine rank-one term by Sherman–Morrison.
pub struct AUpdateSolver {
    factor: Factor,
    lambda_z: f64,
    rho: f64,
    affine: bool,
    n: usize,
}

impl AUpdateSolver {
    pub fn new(
        y: &DMatrix<f64>,
        lambda_z: f64,
        rho: f64,
        affine: bool,
        strategy: ASolveStrategy,
    ) -> Result<Self> {
        let (d, n) = y.shape();
        let reduced = d + usize::from(affine);
        let use_woodbury = match strategy {
            ASolveStrategy::Woodbury => true,
            ASolveStrategy::Direct => false,
            ASolveStrategy::Auto => reduced < n,
        };
        let factor = if use_woodbury {
            let ytilde = if affine {
                let mut t = y.clone().insert_row(d, 1.0);
                t.row_mut(d).fill(1.0);
                t
            } else {
                y.clone()
            };
            let gram = &ytilde * ytilde.transpose();
            let chol = woodbury_factor(&gram, lambda_z, rho, affine, d)?;
            Factor::Woodbury { ytilde, gram, chol }
        } else {
            let eig = SymmetricEigen::new(y.tr_mul(y));
            Factor::Eigen {
                vectors: eig.eigenvectors,
                values: eig.eigenvalues.map(|v| v.max(0.0)),
            }
        };
        let solver = AUpdateSolver { factor, lambda_z, rho, affine, n };
        solver.check_eigen_conditioning()?;
        Ok(solver)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda_z(&self) -> f64 {
        self.lambda_z
    }

    pub fn is_woodbury(&self) -> bool {
        matches!(self.factor, Factor::Woodbury { .. })
    }

    /// Refactors for a new penalty. A no-op when `rho` is unchanged.
    pub fn set_rho(&mut self, rho: f64) -> Result<()> {
        if rho == self.rho {
            return Ok(());
        }
        self.rho = rho;
        let d = match &self.factor {
            Factor::Woodbury { ytilde, .. } => ytilde.nrows() - usize::from(self.affine),
            Factor::Eigen { .. } => 0,
        };
        let (lambda_z, affine) = (self.lambda_z, self.affine);
        match &mut self.factor {
            Factor::Woodbury { gram, chol, .. } => {
                *chol = woodbury_factor(gram, lambda_z, rho, affine, d)?;
            }
            Factor::Eigen { .. } => self.check_eigen_conditioning()?,
        }
        Ok(())
    }

    fn check_eigen_conditioning(&self) -> Result<()> {
        if let Factor::Eigen { values, .. } = &self.factor {
            let lo = values.min() * self.lambda_z + self.rho;
            let hi = values.max() * self.lambda_z + self.rho;
            let rcond = lo / hi;
            if !(rcond >= RCOND_THRESHOLD) {
                return Err(Error::SingularSystem { rcond });
            }
        }
        Ok(())
    }

    /// Applies the inverse system matrix to `rhs` (`N × m`).
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(rhs.nrows(), self.n, "right-hand side has wrong row count");
        match &self.factor {
            Factor::Woodbury { ytilde, chol, .. } => {
                let inner = chol.solve(&(ytilde * rhs));
                (rhs - ytilde.tr_mul(&inner)) / self.rho
            }
            Factor::Eigen { vectors, values } => {
                let apply_base = |m: &DMatrix<f64>| -> DMatrix<f64> {
                    let mut proj = vectors.tr_mul(m);
                    for (i, mut row) in proj.row_iter_mut().enumerate() {
                        row /= self.lambda_z * values[i] + self.rho;
                    }
                    vectors * proj
                };
                let base = apply_base(rhs);
                if !self.affine {
                    return base;
                }
                // Sherman–Morrison for the ρ𝟙𝟙ᵀ term.
                let ones = DMatrix::from_element(self.n, 1, 1.0);
                let b_ones = apply_base(&ones);
                let denom = 1.0 + self.rho * b_ones.sum();
                let col_sums = DMatrix::from_fn(1, base.ncols(), |_, j| base.column(j).sum());
                base - (b_ones * col_sums) * (self.rho / denom)
            }
        }
    }
}

fn woodbury_factor(
    gram: &DMatrix<f64>,
    lambda_z: f64,
    rho: f64,
    affine: bool,
    d: usize,
) -> Result<Cholesky<f64, Dyn>> {
    let mut q = gram.clone();
    for i in 0..d {
        q[(i, i)] += rho / lambda_z;
    }
    if affine {
        q[(d, d)] += 1.0;
    }
    let chol = Cholesky::new(q).ok_or(Error::SingularSystem { rcond: 0.0 })?;
    let diag = chol.l_dirty().diagonal();
    let ratio = diag.min() / diag.max();
    let rcond = ratio * ratio;
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(Error::SingularSystem { rcond });
    }
    Ok(chol)
}

/// Right-hand side `λ_z Yᵀ(Y − E) + ρC − Δ [+ ρ𝟙𝟙ᵀ − 𝟙δᵀ]`.
fn a_rhs(
    state: &SolverState,
    gram_n: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda_z: f64,
    affine: bool,
) -> DMatrix<f64> {
    let rho = state.rho;
    let mut rhs = (gram_n - y.tr_mul(&state.e)) * lambda_z + &state.c * rho - &state.dual;
    if affine {
        for (j, mut col) in rhs.column_iter_mut().enumerate() {
            col.add_scalar_mut(rho - state.delta[j]);
        }
    }
    rhs
}

/// A-update: solves the A-subproblem at the state's current iterates.
pub fn update_a(
    state: &SolverState,
    y: &DMatrix<f64>,
    lambda_z: f64,
    rho: f64,
    affine: bool,
) -> Result<DMatrix<f64>> {
    let solver = AUpdateSolver::new(y, lambda_z, rho, affine, ASolveStrategy::Auto)?;
    let gram_n = y.tr_mul(y);
    let st = SolverState { rho, ..state.clone() };
    Ok(solver.solve(&a_rhs(&st, &gram_n, y, lambda_z, affine)))
}

/// C-update: `J = S_{1/ρ}[A + Δ/ρ]` with its diagonal removed.
pub fn update_c(a_new: &DMatrix<f64>, dual: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let mut c = (a_new + dual / rho).map(|v| shrink(v, 1.0 / rho));
    c.fill_diagonal(0.0);
    c
}

/// E-update: trusted entries of `R = Y − YA` are shrunk by `λ_e/λ_z`,
/// untrusted entries take the full residual.
pub fn update_e(
    y: &DMatrix<f64>,
    a_new: &DMatrix<f64>,
    mask: &ObservationMask,
    lambda_e: f64,
    lambda_z: f64,
) -> DMatrix<f64> {
    let residual = y - y * a_new;
    residual_to_e(residual, mask, lambda_e / lambda_z)
}

fn residual_to_e(residual: DMatrix<f64>, mask: &ObservationMask, threshold: f64) -> DMatrix<f64> {
    residual.zip_map(mask.values(), |r, t| if t { shrink(r, threshold) } else { r })
}

/// Dual ascent: `δ += ρ(Aᵀ𝟙 − 𝟙)` in affine mode, `Δ += ρ(A − C)` always.
pub fn update_multipliers(
    state: &SolverState,
    a_new: &DMatrix<f64>,
    c_new: &DMatrix<f64>,
    rho: f64,
    affine: bool,
) -> (DVector<f64>, DMatrix<f64>) {
    let delta = if affine {
        &state.delta + column_sums(a_new).add_scalar(-1.0) * rho
    } else {
        state.delta.clone()
    };
    let dual = &state.dual + (a_new - c_new) * rho;
    (delta, dual)
}

/// Stopping test: every active max-norm residual strictly below `epsilon`.
pub fn converged(prev: &SolverState, new: &SolverState, epsilon: f64, affine: bool) -> bool {
    Residuals::between(prev, new, affine).below(epsilon)
}

/// The ADMM loop body shared by the plain and greedy solvers.
pub(crate) struct Admm {
    pub y: DMatrix<f64>,
    gram_n: DMatrix<f64>,
    solver: AUpdateSolver,
    pub lambda_e: f64,
    pub lambda_z: f64,
    pub affine: bool,
    pub mu: f64,
    strategy: ASolveStrategy,
    pub state: SolverState,
}

impl Admm {
    pub fn new(y: DMatrix<f64>, config: &SolverConfig, lambda_e: f64, lambda_z: f64) -> Result<Self> {
        let solver = AUpdateSolver::new(&y, lambda_z, config.rho0, config.affine, config.a_solve)?;
        Ok(Admm {
            gram_n: y.tr_mul(&y),
            state: SolverState::zeros(y.nrows(), y.ncols(), config.rho0),
            y,
            solver,
            lambda_e,
            lambda_z,
            affine: config.affine,
            mu: config.mu,
            strategy: config.a_solve,
        })
    }

    /// One A → C → E → (δ, Δ) cycle at the current `ρ`; `ρ` is not advanced.
    pub fn step(&mut self, mask: &ObservationMask) -> Result<Residuals> {
        self.solver.set_rho(self.state.rho)?;
        let rho = self.state.rho;
        let a = self.solver.solve(&a_rhs(&self.state, &self.gram_n, &self.y, self.lambda_z, self.affine));
        let c = update_c(&a, &self.state.dual, rho);
        let e = residual_to_e(&self.y - &self.y * &a, mask, self.lambda_e / self.lambda_z);
        let (delta, dual) = update_multipliers(&self.state, &a, &c, rho, self.affine);
        let next = SolverState { a, c, e, delta, dual, rho, k: self.state.k };
        let residuals = Residuals::between(&self.state, &next, self.affine);
        self.state = next;
        Ok(residuals)
    }

    pub fn advance(&mut self) {
        self.state.rho *= self.mu;
        self.state.k += 1;
    }

    /// Swaps in corrected data; the Gram matrices are rebuilt.
    pub fn replace_data(&mut self, y: DMatrix<f64>) -> Result<()> {
        self.solver = AUpdateSolver::new(&y, self.lambda_z, self.state.rho, self.affine, self.strategy)?;
        self.gram_n = y.tr_mul(&y);
        self.y = y;
        Ok(())
    }

    pub fn set_lambdas(&mut self, lambda_e: f64, lambda_z: f64) -> Result<()> {
        if lambda_z != self.lambda_z {
            self.solver = AUpdateSolver::new(&self.y, lambda_z, self.state.rho, self.affine, self.strategy)?;
        }
        self.lambda_e = lambda_e;
        self.lambda_z = lambda_z;
        Ok(())
    }
}

/// Runs the modified SSC iteration. Untrusted entries of `y` are zeroed first.
pub fn ssc_solve(y: &DataMatrix, mask: &ObservationMask, config: &SolverConfig) -> Result<SscOutput> {
    ssc_solve_observed(y, mask, config, &mut |_| {})
}

/// [`ssc_solve`] with a callback after every iteration.
pub fn ssc_solve_observed(
    y: &DataMatrix,
    mask: &ObservationMask,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> Result<SscOutput> {
    mask.check_shape(y)?;
    ssc_solve_raw(y.masked(mask), mask, config, observer)
}

/// Same loop without zeroing untrusted entries (they may hold fill-in values).
pub(crate) fn ssc_solve_raw(
    y: DMatrix<f64>,
    mask: &ObservationMask,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> Result<SscOutput> {
    config.validate()?;
    let masked = y.zip_map(mask.values(), |v, t| if t { v } else { 0.0 });
    let (lambda_e, lambda_z) = lambdas_raw(config, &masked)?;
    let mut admm = Admm::new(y, config, lambda_e, lambda_z)?;
    let mut residuals = Residuals::default();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        residuals = admm.step(mask)?;
        iterations += 1;
        converged = residuals.below(config.epsilon);
        observer(&IterationView {
            state: &admm.state,
            mask,
            residuals: &residuals,
            threshold: None,
            pruned: 0,
        });
        admm.advance();
        if converged {
            break;
        }
    }
    let y_out = &admm.y - &admm.state.e;
    Ok(SscOutput {
        c_star: admm.state.c,
        y_out,
        iterations,
        converged,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn direct_solve(
        y: &DMatrix<f64>,
        lambda_z: f64,
        rho: f64,
        affine: bool,
        rhs: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let n = y.ncols();
        let mut m = y.tr_mul(y) * lambda_z + DMatrix::identity(n, n) * rho;
        if affine {
            m.add_scalar_mut(rho);
        }
        m.lu().solve(rhs).unwrap()
    }

    #[test]
    fn affine_zero_data_gives_uniform_third() {
        let y = DMatrix::zeros(3, 2);
        let state = SolverState::zeros(3, 2, 1.0);
        let a = update_a(&state, &y, 1.0, 1.0, true).unwrap();
        let oracle = direct_solve(&y, 1.0, 1.0, true, &DMatrix::from_element(2, 2, 1.0));
        assert_relative_eq!(a, DMatrix::from_element(2, 2, 1.0 / 3.0), epsilon = 1e-14);
        assert_relative_eq!(a, oracle, epsilon = 1e-14);
    }

    #[test]
    fn linear_zero_everything_gives_zero() {
        let y = DMatrix::zeros(3, 4);
        let a = update_a(&SolverState::zeros(3, 4, 2.0), &y, 1.0, 2.0, false).unwrap();
        assert!(a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn both_strategies_match_dense_solve() {
        let y = DMatrix::from_fn(5, 8, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let rhs = DMatrix::from_fn(8, 8, |i, j| ((i * 5 + j * 2) % 7) as f64 - 3.0);
        for affine in [false, true] {
            let oracle = direct_solve(&y, 0.7, 3.0, affine, &rhs);
            for strategy in [ASolveStrategy::Woodbury, ASolveStrategy::Direct] {
                let s = AUpdateSolver::new(&y, 0.7, 3.0, affine, strategy).unwrap();
                let got = s.solve(&rhs);
                let rel = (&got - &oracle).norm() / oracle.norm();
                assert!(rel <= 1e-10, "{strategy:?} affine={affine}: {rel}");
            }
        }
    }

    #[test]
    fn set_rho_refactors() {
        let y = DMatrix::from_fn(4, 9, |i, j| ((i + 2 * j) % 5) as f64 - 2.0);
        let rhs = DMatrix::from_fn(9, 3, |i, j| (i + j) as f64);
        let mut s = AUpdateSolver::new(&y, 2.0, 1.0, true, ASolveStrategy::Woodbury).unwrap();
        s.set_rho(4.0).unwrap();
        let oracle = direct_solve(&y, 2.0, 4.0, true, &rhs);
        assert_relative_eq!(s.solve(&rhs), oracle, max_relative = 1e-10, epsilon = 1e-12);
    }

    #[test]
    fn c_update_cases() {
        let c = update_c(&(DMatrix::identity(3, 3) * 5.0), &DMatrix::zeros(3, 3), 1.0);
        assert!(c.iter().all(|&v| v == 0.0));

        let mut a = DMatrix::from_element(3, 3, 2.0);
        a.fill_diagonal(0.0);
        let c = update_c(&a, &DMatrix::zeros(3, 3), 1.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c[(i, j)], if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn e_update_branches() {
        // With A = 0 the residual is Y itself.
        let y = DMatrix::from_row_slice(2, 2, &[3.0, 0.1, 0.1, 3.0]);
        let a = DMatrix::zeros(2, 2);
        let mut mask = ObservationMask::full(2, 2);
        mask.untrust(1, 0);
        mask.untrust(1, 1);
        let e = update_e(&y, &a, &mask, 1.0, 1.0);
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.1, 3.0]));

        let small = DMatrix::from_element(2, 2, 0.4);
        assert!(update_e(&small, &a, &ObservationMask::full(2, 2), 1.0, 2.0).iter().all(|&v| v == 0.0));
        assert_eq!(update_e(&small, &a, &ObservationMask::empty(2, 2), 1.0, 2.0), small);
    }

    #[test]
    fn multiplier_updates() {
        let mut state = SolverState::zeros(1, 2, 2.0);
        let stochastic = DMatrix::from_row_slice(2, 2, &[0.25, 0.5, 0.75, 0.5]);
        let (delta, dual) = update_multipliers(&state, &stochastic, &stochastic, 2.0, true);
        assert_eq!(delta, state.delta);
        assert_eq!(dual, state.dual);

        // column sums (2, 1): residual (1, 0)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 1.0, 0.5]);
        let (delta, _) = update_multipliers(&state, &a, &a, 2.0, true);
        assert_eq!(delta, DVector::from_vec(vec![2.0, 0.0]));

        state.delta = DVector::from_vec(vec![1.0, 1.0]);
        let (delta, _) = update_multipliers(&state, &a, &a, 2.0, false);
        assert_eq!(delta, state.delta);
    }

    #[test]
    fn convergence_test_is_strict_and_mode_aware() {
        let prev = SolverState::zeros(1, 2, 1.0);
        let same = prev.clone();
        assert!(converged(&prev, &same, 1e-3, false));
        // zero A fails the affine row-sum test but not the linear one
        assert!(!converged(&prev, &same, 1e-3, true));

        // ‖A − C‖_∞ exactly ε
        let mut split = prev.clone();
        split.a[(0, 1)] = 1e-3;
        split.c = split.a.clone();
        split.c[(0, 1)] = 0.0;
        let mut base = split.clone();
        base.c = split.a.clone();
        let r = Residuals::between(&base, &split, false);
        assert_eq!(r.split, 1e-3);
        assert_eq!(r.a_change, 0.0);
        assert!(!r.below(1e-3));
        assert!(r.below(1.1e-3));
    }

    #[test]
    fn zero_data_with_overrides_is_a_fixpoint() {
        let y = DataMatrix::new(DMatrix::zeros(3, 5)).unwrap();
        let cfg = SolverConfig { lambda_e: Some(1.0), lambda_z: Some(1.0), ..Default::default() };
        let out = ssc_solve(&y, &ObservationMask::for_data(&y), &cfg).unwrap();
        assert!(out.c_star.iter().all(|&v| v == 0.0));
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn zero_data_without_overrides_is_degenerate() {
        let y = DataMatrix::new(DMatrix::zeros(3, 5)).unwrap();
        let err = ssc_solve(&y, &ObservationMask::for_data(&y), &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)));
    }
}
