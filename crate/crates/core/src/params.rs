//! Data-driven penalty weights `λ_e = α_e/μ_e`, `λ_z = α_z/μ_z`.
//!
//! Untrusted entries are read as zero.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{DataMatrix, ObservationMask, SolverConfig};

/// `min_i max_{j≠i} f(j)` for a per-column scalar `f`.
fn min_max_excluding_self(n: usize, mut pair: impl FnMut(usize, usize) -> f64) -> f64 {
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| pair(i, j))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn mu_e_raw(y: &DMatrix<f64>) -> Result<f64> {
    if y.ncols() < 2 {
        return Err(Error::InvalidData("need at least two columns".into()));
    }
    let norms: Vec<f64> = y.column_iter().map(|c| c.lp_norm(1)).collect();
    let mu = min_max_excluding_self(y.ncols(), |_, j| norms[j]);
    if !(mu > 0.0) {
        return Err(Error::DegenerateData("μ_e is zero (all-zero columns)".into()));
    }
    Ok(mu)
}

pub(crate) fn mu_z_raw(y: &DMatrix<f64>) -> Result<f64> {
    if y.ncols() < 2 {
        return Err(Error::InvalidData("need at least two columns".into()));
    }
    let gram = y.tr_mul(y);
    let mu = min_max_excluding_self(y.ncols(), |i, j| gram[(i, j)].abs());
    if !(mu > 0.0) {
        return Err(Error::DegenerateData(
            "μ_z is zero (a column is orthogonal to all others)".into(),
        ));
    }
    Ok(mu)
}

/// `μ_e = min_i max_{j≠i} ‖y_j‖₁` on masked data.
pub fn mu_e(y: &DataMatrix, mask: &ObservationMask) -> Result<f64> {
    mask.check_shape(y)?;
    mu_e_raw(&y.masked(mask))
}

/// `μ_z = min_i max_{j≠i} |⟨y_i, y_j⟩|` on masked data.
pub fn mu_z(y: &DataMatrix, mask: &ObservationMask) -> Result<f64> {
    mask.check_shape(y)?;
    mu_z_raw(&y.masked(mask))
}

/// Penalty weights `(λ_e, λ_z)`, honoring explicit overrides in `config`.
pub fn lambdas(config: &SolverConfig, y: &DataMatrix, mask: &ObservationMask) -> Result<(f64, f64)> {
    mask.check_shape(y)?;
    lambdas_raw(config, &y.masked(mask))
}

pub(crate) fn lambdas_raw(config: &SolverConfig, masked: &DMatrix<f64>) -> Result<(f64, f64)> {
    let lambda_e = match config.lambda_e {
        Some(l) => l,
        None => config.alpha_e / mu_e_raw(masked)?,
    };
    let lambda_z = match config.lambda_z {
        Some(l) => l,
        None => config.alpha_z / mu_z_raw(masked)?,
    };
    Ok((lambda_e, lambda_z))
}
