//! Soft-thresholding, the proximal map of the ℓ1 norm.

use nalgebra::DMatrix;

/// `S_ε[x]`: `x − ε` above `ε`, `x + ε` below `−ε`, zero in between.
#[inline]
pub fn shrink(x: f64, eps: f64) -> f64 {
    if x > eps {
        x - eps
    } else if x < -eps {
        x + eps
    } else {
        0.0
    }
}

/// Elementwise [`shrink`].
pub fn shrink_matrix(x: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    x.map(|v| shrink(v, eps))
}
