//! Cluster-level steepest descent on the regularized global cost, used as a
//! reference for the fixed point the distributed algorithm approaches.

use nalgebra::DVector;

use super::{AdaptConfig, AdaptError};
use crate::synth::NodeEnvironment;
use crate::topology::{ClusteredNetwork, CombinerSet};

pub const DESCENT_TOLERANCE: f64 = 1e-10;
pub const DESCENT_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    /// One estimate per cluster.
    pub clusters: Vec<DVector<f64>>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl DescentResult {
    /// Expands cluster estimates to one per node.
    pub fn per_node(&self, network: &ClusteredNetwork) -> Vec<DVector<f64>> {
        (0..network.n_nodes()).map(|k| self.clusters[network.cluster_of(k)].clone()).collect()
    }
}

/// Gradient of cluster i's cost with the other clusters held fixed:
/// Σ_{k∈C_i} (R_{x,k} w_i − p_{xd,k}) + η Σ_{k∈C_i} Σ_{ℓ∈N_k\C_i} ρ_{kℓ} (w_i − w_{C(ℓ)}).
pub fn equilibrium_gradient(
    env: &NodeEnvironment,
    network: &ClusteredNetwork,
    combiners: &CombinerSet,
    eta: f64,
    w: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    network
        .clusters()
        .iter()
        .enumerate()
        .map(|(i, members)| {
            let wi = &w[i];
            let mut g = DVector::zeros(wi.len());
            for &k in members {
                g += &env.r_x()[k] * wi - env.p_xd(k);
                for l in network.inter_neighbors(k) {
                    let rho = combiners.p[(k, l)];
                    if rho != 0.0 {
                        g += (wi - &w[network.cluster_of(l)]) * (eta * rho);
                    }
                }
            }
            g
        })
        .collect()
}

/// Runs w_i ← w_i − μ g_i(w) from w = 0 for every cluster simultaneously
/// until the stacked gradient norm drops below [`DESCENT_TOLERANCE`].
pub fn centralized_descent(
    env: &NodeEnvironment,
    network: &ClusteredNetwork,
    combiners: &CombinerSet,
    config: &AdaptConfig,
    max_iters: usize,
) -> Result<DescentResult, AdaptError> {
    if env.n_nodes() != network.n_nodes() {
        return Err(AdaptError::Shape(format!(
            "environment has {} nodes, network has {}",
            env.n_nodes(),
            network.n_nodes()
        )));
    }
    let mut w = vec![DVector::zeros(env.dim()); network.n_clusters()];
    let mut gradient_norm = f64::INFINITY;
    for iterations in 0..=max_iters {
        let g = equilibrium_gradient(env, network, combiners, config.eta, &w);
        gradient_norm = g.iter().map(|gi| gi.norm_squared()).sum::<f64>().sqrt();
        if gradient_norm <= DESCENT_TOLERANCE {
            return Ok(DescentResult { clusters: w, iterations, gradient_norm });
        }
        if !gradient_norm.is_finite() || iterations == max_iters {
            break;
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            wi.axpy(-config.mu, gi, 1.0);
        }
    }
    Err(AdaptError::NotConverged { iterations: max_iters, gradient_norm })
}
