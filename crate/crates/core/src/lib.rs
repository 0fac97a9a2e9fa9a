//! Sparse subspace clustering (SSC) for data with erasures, sparse errors and
//! dense noise.
//!
//! The pipeline has two stages. A solver produces a sparse self-representation
//! `C` of the data (`Y ≈ YC`, `diag(C) = 0`):
//!
//! * [`admm::ssc_solve`] runs the erasure-aware ADMM iteration,
//! * [`greedy::gssc_solve`] wraps it in an outer loop that re-qualifies
//!   suspected errors as erasures,
//! * [`greedy::fgssc_solve`] fuses that greedy pruning into the ADMM iteration.
//!
//! [`spectral`] then turns `C` into the affinity `W = |C| + |Cᵀ|` and clusters
//! it. [`synth`] generates benchmark data with full ground truth.

pub mod admm;
pub mod error;
pub mod greedy;
pub mod params;
pub mod shrink;
pub mod spectral;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ASolveStrategy, CoefficientMatrix, CorrectionRule, DataMatrix, GreedyConfig, ObservationMask,
    SolverConfig,
    SolverState,
};

/// Which solver produces the coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Ssc,
    Gssc,
    Fgssc,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ssc => "ssc",
            Algorithm::Gssc => "gssc",
            Algorithm::Fgssc => "fgssc",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssc" => Ok(Algorithm::Ssc),
            "gssc" => Ok(Algorithm::Gssc),
            "fgssc" => Ok(Algorithm::Fgssc),
            other => Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Runs the selected solver and returns its coefficient matrix.
pub fn self_representation(
    y: &DataMatrix,
    mask: &ObservationMask,
    config: &SolverConfig,
    algorithm: Algorithm,
) -> Result<CoefficientMatrix> {
    match algorithm {
        Algorithm::Ssc => Ok(CoefficientMatrix(admm::ssc_solve(y, mask, config)?.c_star)),
        Algorithm::Gssc => Ok(CoefficientMatrix(greedy::gssc_solve(y, mask, config)?.c_star)),
        Algorithm::Fgssc => Ok(greedy::fgssc_solve(y, mask, config)?.coefficients),
    }
}

/// Solver followed by spectral clustering into `k` groups.
pub fn cluster(
    y: &DataMatrix,
    mask: &ObservationMask,
    config: &SolverConfig,
    algorithm: Algorithm,
    k: usize,
    seed: u64,
) -> Result<spectral::LabelVector> {
    let c = self_representation(y, mask, config, algorithm)?;
    let w = spectral::build_affinity(&c);
    spectral::spectral_cluster(&w, k, seed)
}
