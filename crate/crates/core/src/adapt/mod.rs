//! Adaptive estimators over a network.
//!
//! All step functions are synchronous: every node reads the iteration-`n`
//! estimates and the result holds the iteration-`n+1` estimates.

mod descent;
mod simplex;
mod unmix;

pub use descent::{centralized_descent, equilibrium_gradient, DescentResult, DESCENT_MAX_ITERS, DESCENT_TOLERANCE};
pub use simplex::project_simplex;
pub use unmix::{rmse, sign, unmix_step, UnmixData};

use nalgebra::DVector;
use thiserror::Error;

use crate::synth::Sample;
use crate::topology::{ClusteredNetwork, CombinerSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptError {
    #[error("step size must be positive and finite, got {0}")]
    StepSize(f64),
    #[error("regularization strength must be nonnegative and finite, got {0}")]
    Strength(f64),
    #[error("cannot project an empty vector")]
    EmptyVector,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("steepest descent did not converge in {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },
}

/// Step size μ and regularization strength η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptConfig {
    pub mu: f64,
    pub eta: f64,
}

impl AdaptConfig {
    pub fn new(mu: f64, eta: f64) -> Result<Self, AdaptError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(AdaptError::StepSize(mu));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(AdaptError::Strength(eta));
        }
        Ok(Self { mu, eta })
    }
}

/// Per-node estimates w_k(n) and the intermediates ψ_k(n) that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptState {
    pub w: Vec<DVector<f64>>,
    pub psi: Vec<DVector<f64>>,
}

impl AdaptState {
    /// w_k(0) = 0 for all k.
    pub fn zeros(n_nodes: usize, dim: usize) -> Self {
        Self::from_estimates(vec![DVector::zeros(dim); n_nodes])
    }

    pub fn from_estimates(w: Vec<DVector<f64>>) -> Self {
        let psi = w.clone();
        Self { w, psi }
    }

    pub fn n_nodes(&self) -> usize {
        self.w.len()
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|w| w.iter().all(|v| v.is_finite()))
    }

    pub fn max_norm(&self) -> f64 {
        self.w.iter().map(|w| w.norm()).fold(0.0, f64::max)
    }
}

/// Network MSD (1/N) Σ_k ‖w_k − w*_k‖².
pub fn network_msd(w: &[DVector<f64>], truth: &[DVector<f64>]) -> f64 {
    let total: f64 = w.iter().zip(truth).map(|(w, t)| (w - t).norm_squared()).sum();
    total / w.len() as f64
}

type WeightList = Vec<Vec<(usize, f64)>>;

/// Sparse per-node weights for one family of diffusion step.
///
/// `exchange[k]` holds `(ℓ, c_{ℓk})`, `regularize[k]` holds `(ℓ, ρ_{kℓ})` and
/// `combine[k]` holds `(ℓ, a_{ℓk})`. A plan without a combination phase
/// returns ψ directly.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPlan {
    exchange: WeightList,
    regularize: WeightList,
    combine: Option<WeightList>,
}

fn nonzero(pairs: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    pairs.filter(|&(_, w)| w != 0.0).collect()
}

impl DiffusionPlan {
    /// Clustered multitask ATC diffusion.
    pub fn clustered(network: &ClusteredNetwork, combiners: &CombinerSet) -> Self {
        let n = network.n_nodes();
        let exchange = (0..n)
            .map(|k| nonzero(network.intra_neighbors(k).map(|l| (l, combiners.c[(l, k)]))))
            .collect();
        let regularize = (0..n)
            .map(|k| nonzero(network.inter_neighbors(k).map(|l| (l, combiners.p[(k, l)]))))
            .collect();
        let combine = (0..n)
            .map(|k| nonzero(network.intra_neighbors(k).map(|l| (l, combiners.a[(l, k)]))))
            .collect();
        Self { exchange, regularize, combine: Some(combine) }
    }

    /// Single-task ATC diffusion over full neighborhoods, no regularization.
    pub fn single_task(network: &ClusteredNetwork, combiners: &CombinerSet) -> Self {
        let n = network.n_nodes();
        let over_all = |f: &dyn Fn(usize, usize) -> f64| -> WeightList {
            (0..n)
                .map(|k| nonzero(network.neighbors(k).iter().map(|&l| (l, f(l, k)))))
                .collect()
        };
        let exchange = over_all(&|l, k| combiners.c[(l, k)]);
        let combine = over_all(&|l, k| combiners.a[(l, k)]);
        Self { exchange, regularize: vec![Vec::new(); n], combine: Some(combine) }
    }

    /// Per-node multitask LMS with regularization over 𝒩_k⁻ and no combination.
    pub fn multitask(network: &ClusteredNetwork, combiners: &CombinerSet) -> Self {
        let n = network.n_nodes();
        let exchange = (0..n).map(|k| vec![(k, 1.0)]).collect();
        let regularize = (0..n)
            .map(|k| {
                nonzero(
                    network
                        .neighbors(k)
                        .iter()
                        .filter(|&&l| l != k)
                        .map(|&l| (l, combiners.p[(k, l)])),
                )
            })
            .collect();
        Self { exchange, regularize, combine: None }
    }

    /// Independent LMS filters.
    pub fn non_cooperative(n_nodes: usize) -> Self {
        Self {
            exchange: (0..n_nodes).map(|k| vec![(k, 1.0)]).collect(),
            regularize: vec![Vec::new(); n_nodes],
            combine: None,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.exchange.len()
    }

    fn adapt_node(&self, k: usize, w: &[DVector<f64>], sample: &Sample, config: &AdaptConfig) -> DVector<f64> {
        let wk = &w[k];
        let mut grad: Option<DVector<f64>> = None;
        for &(l, c) in &self.exchange[k] {
            let xl = &sample.x[l];
            let coef = c * (sample.d[l] - xl.dot(wk));
            match grad.as_mut() {
                None => grad = Some(xl * coef),
                Some(g) => g.axpy(coef, xl, 1.0),
            }
        }
        let mut grad = grad.unwrap_or_else(|| DVector::zeros(wk.len()));
        let reg = &self.regularize[k];
        if config.eta != 0.0 && !reg.is_empty() {
            let mut pull: DVector<f64> = DVector::zeros(wk.len());
            for &(l, rho) in reg {
                for i in 0..wk.len() {
                    pull[i] += rho * (w[l][i] - wk[i]);
                }
            }
            for i in 0..wk.len() {
                grad[i] += config.eta * pull[i];
            }
        }
        let mut psi = wk.clone();
        for i in 0..psi.len() {
            psi[i] += config.mu * grad[i];
        }
        psi
    }

    /// One synchronous adapt(-then-combine) iteration.
    pub fn step(&self, state: &AdaptState, sample: &Sample, config: &AdaptConfig) -> AdaptState {
        let n = self.n_nodes();
        let psi: Vec<DVector<f64>> = (0..n).map(|k| self.adapt_node(k, &state.w, sample, config)).collect();
        let w = match &self.combine {
            None => psi.clone(),
            Some(combine) => combine
                .iter()
                .map(|weights| {
                    let mut acc: Option<DVector<f64>> = None;
                    for &(l, a) in weights {
                        match acc.as_mut() {
                            None => acc = Some(&psi[l] * a),
                            Some(v) => v.axpy(a, &psi[l], 1.0),
                        }
                    }
                    acc.expect("combination weights are never empty")
                })
                .collect(),
        };
        AdaptState { w, psi }
    }
}

/// Clustered multitask diffusion LMS step.
pub fn atc_step(
    state: &AdaptState,
    sample: &Sample,
    network: &ClusteredNetwork,
    combiners: &CombinerSet,
    config: &AdaptConfig,
) -> AdaptState {
    DiffusionPlan::clustered(network, combiners).step(state, sample, config)
}

/// Single-task diffusion LMS step (η is ignored).
pub fn single_task_step(
    state: &AdaptState,
    sample: &Sample,
    network: &ClusteredNetwork,
    combiners: &CombinerSet,
    config: &AdaptConfig,
) -> AdaptState {
    DiffusionPlan::single_task(network, combiners).step(state, sample, config)
}

/// Multitask diffusion LMS step (A and C are ignored).
pub fn multitask_step(
    state: &AdaptState,
    sample: &Sample,
    network: &ClusteredNetwork,
    combiners: &CombinerSet,
    config: &AdaptConfig,
) -> AdaptState {
    DiffusionPlan::multitask(network, combiners).step(state, sample, config)
}

/// Standalone LMS at every node.
pub fn lms_step(state: &AdaptState, sample: &Sample, config: &AdaptConfig) -> AdaptState {
    DiffusionPlan::non_cooperative(state.n_nodes()).step(state, sample, config)
}
