//! Projected diffusion step for spatially regularized abundance estimation.

use nalgebra::{DMatrix, DVector};

use super::{project_simplex, AdaptConfig, AdaptError, AdaptState};

/// sgn with sgn(0) = 0.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Endmember matrix, one pixel spectrum per node and sparse neighbor weights.
#[derive(Debug, Clone, PartialEq)]
pub struct UnmixData {
    m: DMatrix<f64>,
    y: Vec<DVector<f64>>,
    weights: Vec<Vec<(usize, f64)>>,
}

impl UnmixData {
    /// `weights[k]` lists `(j, ρ_kj)` for the neighbors of pixel k.
    pub fn new(m: DMatrix<f64>, y: Vec<DVector<f64>>, weights: Vec<Vec<(usize, f64)>>) -> Result<Self, AdaptError> {
        if y.len() != weights.len() {
            return Err(AdaptError::Shape(format!("{} pixels but {} weight lists", y.len(), weights.len())));
        }
        if let Some(k) = y.iter().position(|yk| yk.len() != m.nrows()) {
            return Err(AdaptError::Shape(format!("pixel {} has {} bands, expected {}", k + 1, y[k].len(), m.nrows())));
        }
        if weights.iter().flatten().any(|&(j, _)| j >= y.len()) {
            return Err(AdaptError::Shape("neighbor index out of range".into()));
        }
        Ok(Self { m, y, weights })
    }

    pub fn n_pixels(&self) -> usize {
        self.y.len()
    }

    pub fn n_endmembers(&self) -> usize {
        self.m.ncols()
    }

    pub fn endmembers(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn pixels(&self) -> &[DVector<f64>] {
        &self.y
    }

    pub fn weights(&self) -> &[Vec<(usize, f64)>] {
        &self.weights
    }
}

/// w_k ← Π_simplex(w_k + μ Mᵀ(y_k − M w_k) − μη Σ_j ρ_kj sgn(w_k − w_j)).
///
/// `psi` in the returned state holds the pre-projection values.
pub fn unmix_step(state: &AdaptState, data: &UnmixData, config: &AdaptConfig) -> Result<AdaptState, AdaptError> {
    let n = data.n_pixels();
    if state.n_nodes() != n {
        return Err(AdaptError::Shape(format!("state has {} pixels, data has {n}", state.n_nodes())));
    }
    let mut psi = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for k in 0..n {
        let wk = &state.w[k];
        let residual = &data.y[k] - &data.m * wk;
        let mut step = data.m.tr_mul(&residual) * config.mu;
        if config.eta != 0.0 {
            for &(j, rho) in &data.weights[k] {
                let wj = &state.w[j];
                for r in 0..wk.len() {
                    step[r] -= config.mu * config.eta * rho * sign(wk[r] - wj[r]);
                }
            }
        }
        let p = wk + step;
        w.push(project_simplex(&p)?);
        psi.push(p);
    }
    Ok(AdaptState { w, psi })
}

/// sqrt(1/(N R) Σ_n ‖ŵ_n − w*_n‖²).
pub fn rmse(estimate: &[DVector<f64>], truth: &[DVector<f64>]) -> Result<f64, AdaptError> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(AdaptError::Shape(format!("{} estimates vs {} truths", estimate.len(), truth.len())));
    }
    let r = truth[0].len();
    let mut total = 0.0;
    for (e, t) in estimate.iter().zip(truth) {
        if e.len() != t.len() {
            return Err(AdaptError::Shape("abundance length mismatch".into()));
        }
        total += (e - t).norm_squared();
    }
    Ok((total / (estimate.len() * r) as f64).sqrt())
}
