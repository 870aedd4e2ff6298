//! Closed-form mean and mean-square performance models of the clustered
//! diffusion LMS recursion.
//!
//! With v(n) = w(n) − w* stacked over nodes, the error obeys
//! E v(n+1) = B E v(n) − μη r, and weighted variances follow
//! E‖v(n+1)‖²_Σ = E‖v(n)‖²_{BᵀΣB} + μ² tr(GΣ) + μ²η² rᵀΣr − 2μη rᵀΣB E v(n).

mod model;
mod msd;

pub use model::{TheoryModel, DEFAULT_SIZE_CAP};
pub use msd::MsdCurve;
pub(crate) use msd::curve_csv;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("theory needs (LN)^2 = {required} entries, above the cap of {cap}; raise size_cap or shrink the network")]
    SizeCap { required: usize, cap: usize },
    #[error("mean recursion is unstable: spectral radius of B is {radius}")]
    Unstable { radius: f64 },
    #[error("B − I is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("steady-state solve did not converge (residual {residual:e})")]
    NotConverged { residual: f64 },
}

/// Kronecker product.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for a square matrix.
pub fn unvec(v: &DVector<f64>) -> DMatrix<f64> {
    let n = (v.len() as f64).sqrt().round() as usize;
    assert_eq!(n * n, v.len(), "unvec needs a square length");
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// 10·log10(x).
pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}
