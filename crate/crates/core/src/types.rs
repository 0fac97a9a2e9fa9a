//! Shared numeric types and solver configuration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Observation matrix `Y` (`D × N`); one column per data point.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    /// Requires `D ≥ 1`, `N ≥ 2` and finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 1 || values.ncols() < 2 {
            return Err(Error::InvalidData(format!(
                "need D ≥ 1 and N ≥ 2, got {}×{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidData(format!("non-finite entry at ({i}, {j})")));
        }
        Ok(DataMatrix(values))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// `Y ⊙ χ_Ω`.
    pub fn masked(&self, mask: &ObservationMask) -> DMatrix<f64> {
        self.0.zip_map(mask.values(), |v, t| if t { v } else { 0.0 })
    }

    /// Reorders columns: column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> DataMatrix {
        DataMatrix(DMatrix::from_fn(self.dim(), perm.len(), |i, j| {
            self.0[(i, perm[j])]
        }))
    }
}

/// The index set `Ω` of trusted entries; `true` means observed and trusted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask(DMatrix<bool>);

impl ObservationMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        ObservationMask(DMatrix::from_element(rows, cols, true))
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        ObservationMask(DMatrix::from_element(rows, cols, false))
    }

    pub fn from_matrix(trusted: DMatrix<bool>) -> Self {
        ObservationMask(trusted)
    }

    pub fn for_data(y: &DataMatrix) -> Self {
        Self::full(y.dim(), y.len())
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn values(&self) -> &DMatrix<bool> {
        &self.0
    }

    pub fn is_trusted(&self, row: usize, col: usize) -> bool {
        self.0[(row, col)]
    }

    pub fn trusted_count(&self) -> usize {
        self.0.iter().filter(|&&t| t).count()
    }

    /// Removes `(row, col)` from `Ω`. Returns whether the entry was trusted.
    pub fn untrust(&mut self, row: usize, col: usize) -> bool {
        std::mem::replace(&mut self.0[(row, col)], false)
    }

    /// `true` when every entry trusted here is also trusted in `other`.
    pub fn is_subset_of(&self, other: &ObservationMask) -> bool {
        self.shape() == other.shape() && self.0.iter().zip(other.0.iter()).all(|(&a, &b)| !a || b)
    }

    pub fn permute_columns(&self, perm: &[usize]) -> ObservationMask {
        ObservationMask(DMatrix::from_fn(self.0.nrows(), perm.len(), |i, j| {
            self.0[(i, perm[j])]
        }))
    }

    pub fn check_shape(&self, y: &DataMatrix) -> Result<()> {
        if self.shape() != (y.dim(), y.len()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}×{}", y.dim(), y.len()),
                found: format!("{}×{}", self.shape().0, self.shape().1),
            });
        }
        Ok(())
    }
}

/// Converged self-representation `C*` (`N × N`, zero diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(pub DMatrix<f64>);

/// How the `N × N` A-update system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ASolveStrategy {
    /// Push-through identity with a `D × D` (or `(D+1) × (D+1)`) factorization.
    Woodbury,
    /// Full `N × N` system through an eigendecomposition of `YᵀY`, reused across `ρ`.
    Direct,
    /// Woodbury when the reduced system is smaller than `N`, direct otherwise.
    #[default]
    Auto,
}

/// How FGSSC folds the error estimate back into the data after even iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionRule {
    /// Untrusted entries take the reconstruction `YA`; `E` is kept on trusted
    /// entries and cleared elsewhere.
    #[default]
    FillUntrusted,
    /// `Y ← Y − χ_Ω⊙E`, then `E ← 0`.
    SubtractTrusted,
}

/// Parameters of the greedy error re-qualification.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyConfig {
    /// Warm-up iterations before pruning starts (FGSSC).
    pub k0: usize,
    /// Initial threshold factor on `‖E‖_∞` (FGSSC).
    pub alpha0: f64,
    /// Threshold decay factor (FGSSC) or initial threshold factor (GSSC).
    pub alpha1: f64,
    /// Threshold floor factor on the data median.
    pub alpha2: f64,
    /// GSSC threshold decay per outer pass.
    pub beta: f64,
    /// Recompute `μ_e`, `μ_z` after each data correction (FGSSC).
    pub refresh_mu: bool,
    /// Number of outer passes for GSSC.
    pub outer_iter: usize,
    /// Pruning beyond this fraction of the initially trusted entries fails.
    pub max_prune_fraction: f64,
    pub correction: CorrectionRule,
    /// Apply the median floor to the first FGSSC threshold as well.
    pub floor_at_k0: bool,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            k0: 4,
            alpha0: 0.6,
            alpha1: 0.95,
            alpha2: 1.0,
            beta: 0.8,
            refresh_mu: false,
            outer_iter: 10,
            max_prune_fraction: 0.95,
            correction: CorrectionRule::FillUntrusted,
            floor_at_k0: true,
        }
    }
}

/// ADMM parameters; `λ_e = α_e/μ_e` and `λ_z = α_z/μ_z` unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub alpha_e: f64,
    pub alpha_z: f64,
    pub rho0: f64,
    /// Growth factor of the penalty `ρ` per iteration.
    pub mu: f64,
    pub epsilon: f64,
    /// Affine subspaces (adds `Cᵀ𝟙 = 𝟙`) instead of linear ones.
    pub affine: bool,
    pub max_iter: usize,
    pub lambda_e: Option<f64>,
    pub lambda_z: Option<f64>,
    pub greedy: Option<GreedyConfig>,
    pub a_solve: ASolveStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha_e: 5.0,
            alpha_z: 7.0,
            rho0: 10.0,
            mu: 1.05,
            epsilon: 1e-3,
            affine: false,
            max_iter: 200,
            lambda_e: None,
            lambda_z: None,
            greedy: None,
            a_solve: ASolveStrategy::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.alpha_e > 0.0) || !(self.alpha_z > 0.0) {
            return bad("alpha_e and alpha_z must be positive");
        }
        if !(self.rho0 > 0.0) {
            return bad("rho0 must be positive");
        }
        if !(self.mu >= 1.0) {
            return bad("mu must be at least 1");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        for (name, v) in [("lambda_e", self.lambda_e), ("lambda_z", self.lambda_z)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidConfig(format!("{name} must be positive")));
                }
            }
        }
        if let Some(g) = &self.greedy {
            if g.k0 == 0 {
                return bad("k0 must be positive");
            }
            if !(g.alpha0 > 0.0 && g.alpha0 <= 1.0) {
                return bad("alpha0 must lie in (0, 1]");
            }
            if !(g.alpha1 > 0.0 && g.alpha1 <= 1.0) {
                return bad("alpha1 must lie in (0, 1]");
            }
            if !(g.alpha2 > 0.0) {
                return bad("alpha2 must be positive");
            }
            if !(g.beta > 0.0 && g.beta < 1.0) {
                return bad("beta must lie in (0, 1)");
            }
            if g.outer_iter == 0 {
                return bad("outer_iter must be positive");
            }
            if !(g.max_prune_fraction > 0.0 && g.max_prune_fraction <= 1.0) {
                return bad("max_prune_fraction must lie in (0, 1]");
            }
        }
        Ok(())
    }

    pub fn greedy_or_default(&self) -> GreedyConfig {
        self.greedy.clone().unwrap_or_default()
    }
}

/// ADMM iterates for one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub e: DMatrix<f64>,
    /// Multiplier of the affine constraint `Aᵀ𝟙 = 𝟙`.
    pub delta: DVector<f64>,
    /// Multiplier of the splitting constraint `A = C`.
    pub dual: DMatrix<f64>,
    pub rho: f64,
    pub k: usize,
}

impl SolverState {
    pub fn zeros(d: usize, n: usize, rho0: f64) -> Self {
        SolverState {
            a: DMatrix::zeros(n, n),
            c: DMatrix::zeros(n, n),
            e: DMatrix::zeros(d, n),
            delta: DVector::zeros(n),
            dual: DMatrix::zeros(n, n),
            rho: rho0,
            k: 0,
        }
    }
}
