//! Streaming synthetic data for the linear regression model
//! `d_k(n) = x_k(n)ᵀ w*_k + z_k(n)` and the application scenarios.

mod illustrative;
pub mod localization;
pub mod spectrum;
pub mod unmix;

pub use illustrative::{illustrative_env, ILLUSTRATIVE_NOISE_VARIANCES, ILLUSTRATIVE_REGRESSOR_VARIANCES};
pub use localization::{localization_env, LocalizationParams, LocalizationScenario, Placement};
pub use spectrum::{spectrum_env, SpectrumParams, SpectrumScenario};
pub use unmix::{unmix_env, UnmixEnv, UnmixParams};

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::topology::{ClusteredNetwork, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("regressor covariance of node {0} is not symmetric positive-definite")]
    NotPositiveDefinite(usize),
    #[error("node {node}: {what} has length {got}, expected {expected}")]
    Dimension { node: usize, what: &'static str, got: usize, expected: usize },
    #[error("expected {expected} per-node entries for {what}, got {got}")]
    NodeCount { what: &'static str, got: usize, expected: usize },
    #[error("noise variance of node {0} is negative or not finite")]
    NoiseVariance(usize),
    #[error("nodes {0} and {1} share a cluster but have different optima")]
    ClusterOptimum(usize, usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// One draw of network data: a regressor and a reference per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<DVector<f64>>,
    pub d: Vec<f64>,
}

impl Sample {
    pub fn is_finite(&self) -> bool {
        self.d.iter().all(|v| v.is_finite()) && self.x.iter().all(|x| x.iter().all(|v| v.is_finite()))
    }
}

/// A source of streaming network data with known per-node optima.
pub trait DataModel: Send + Sync {
    fn n_nodes(&self) -> usize;
    fn dim(&self) -> usize;
    /// w*_k for every node.
    fn truth(&self) -> &[DVector<f64>];
    fn draw(&self, rng: &mut dyn RngCore) -> Sample;
}

/// Per-node optimum, regressor covariance and noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEnvironment {
    w_star: Vec<DVector<f64>>,
    r_x: Vec<DMatrix<f64>>,
    sigma2_z: Vec<f64>,
    chol: Vec<DMatrix<f64>>,
}

impl NodeEnvironment {
    pub fn new(w_star: Vec<DVector<f64>>, r_x: Vec<DMatrix<f64>>, sigma2_z: Vec<f64>) -> Result<Self, SynthError> {
        let n = w_star.len();
        if n == 0 {
            return Err(SynthError::Parameter("environment needs at least one node".into()));
        }
        for (what, got) in [("regressor covariances", r_x.len()), ("noise variances", sigma2_z.len())] {
            if got != n {
                return Err(SynthError::NodeCount { what, got, expected: n });
            }
        }
        let dim = w_star[0].len();
        let mut chol = Vec::with_capacity(n);
        for k in 0..n {
            if w_star[k].len() != dim {
                return Err(SynthError::Dimension { node: k + 1, what: "w*", got: w_star[k].len(), expected: dim });
            }
            let r = &r_x[k];
            if r.nrows() != dim || r.ncols() != dim {
                return Err(SynthError::Dimension { node: k + 1, what: "R_x", got: r.nrows(), expected: dim });
            }
            if (r - r.transpose()).amax() > 1e-12 * r.amax().max(1.0) {
                return Err(SynthError::NotPositiveDefinite(k + 1));
            }
            let factor = r.clone().cholesky().ok_or(SynthError::NotPositiveDefinite(k + 1))?;
            chol.push(factor.l());
            if !(sigma2_z[k] >= 0.0 && sigma2_z[k].is_finite()) {
                return Err(SynthError::NoiseVariance(k + 1));
            }
        }
        Ok(Self { w_star, r_x, sigma2_z, chol })
    }

    /// Checks that nodes of the same cluster share exactly the same optimum.
    pub fn check_clusters(&self, network: &ClusteredNetwork) -> Result<(), SynthError> {
        if network.n_nodes() != self.n_nodes() {
            return Err(SynthError::NodeCount { what: "network nodes", got: network.n_nodes(), expected: self.n_nodes() });
        }
        for members in network.clusters() {
            let first = members[0];
            if let Some(&k) = members.iter().find(|&&k| self.w_star[k] != self.w_star[first]) {
                return Err(SynthError::ClusterOptimum(first + 1, k + 1));
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.w_star.len()
    }

    pub fn dim(&self) -> usize {
        self.w_star[0].len()
    }

    pub fn w_star(&self) -> &[DVector<f64>] {
        &self.w_star
    }

    pub fn r_x(&self) -> &[DMatrix<f64>] {
        &self.r_x
    }

    pub fn sigma2_z(&self) -> &[f64] {
        &self.sigma2_z
    }

    /// p_{xd,k} = R_{x,k} w*_k.
    pub fn p_xd(&self, k: usize) -> DVector<f64> {
        &self.r_x[k] * &self.w_star[k]
    }

    /// Stacked w* of length L·N.
    pub fn stacked_w_star(&self) -> DVector<f64> {
        let l = self.dim();
        DVector::from_fn(l * self.n_nodes(), |i, _| self.w_star[i / l][i % l])
    }

    /// Draws x_k ~ N(0, R_{x,k}) and d_k = x_kᵀ w*_k + z_k for every node.
    pub fn draw_sample(&self, rng: &mut dyn RngCore) -> Sample {
        let l = self.dim();
        let mut x = Vec::with_capacity(self.n_nodes());
        let mut d = Vec::with_capacity(self.n_nodes());
        for k in 0..self.n_nodes() {
            let g = DVector::from_fn(l, |_, _| StandardNormal.sample(rng));
            let xk = &self.chol[k] * g;
            let noise: f64 = StandardNormal.sample(rng);
            let dk = xk.dot(&self.w_star[k]) + self.sigma2_z[k].sqrt() * noise;
            x.push(xk);
            d.push(dk);
        }
        Sample { x, d }
    }
}

impl DataModel for NodeEnvironment {
    fn n_nodes(&self) -> usize {
        NodeEnvironment::n_nodes(self)
    }

    fn dim(&self) -> usize {
        NodeEnvironment::dim(self)
    }

    fn truth(&self) -> &[DVector<f64>] {
        &self.w_star
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Sample {
        self.draw_sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::data_stream;

    fn iso_env(n: usize, l: usize, s2x: f64, s2z: f64) -> NodeEnvironment {
        NodeEnvironment::new(
            (0..n).map(|k| DVector::from_element(l, 0.1 * k as f64 + 0.3)).collect(),
            vec![DMatrix::identity(l, l) * s2x; n],
            vec![s2z; n],
        )
        .unwrap()
    }

    #[test]
    fn noiseless_reference_is_exact() {
        let env = iso_env(3, 2, 1.0, 0.0);
        let s = env.draw_sample(&mut data_stream(1, 0, 0));
        for k in 0..3 {
            assert_eq!(s.d[k], s.x[k].dot(&env.w_star()[k]));
        }
    }

    #[test]
    fn unit_variance_regressors_have_unit_sample_variance() {
        let env = iso_env(1, 2, 1.0, 0.1);
        let mut rng = data_stream(99, 0, 0);
        let draws = 100_000;
        let mut sums = [0.0f64; 2];
        for _ in 0..draws {
            let s = env.draw_sample(&mut rng);
            for i in 0..2 {
                sums[i] += s.x[0][i] * s.x[0][i];
            }
        }
        for s in sums {
            let var = s / draws as f64;
            assert!((0.97..=1.03).contains(&var), "variance {var}");
        }
    }

    #[test]
    fn correlated_covariance_is_reproduced() {
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let env = NodeEnvironment::new(vec![DVector::zeros(2)], vec![r.clone()], vec![0.0]).unwrap();
        let mut rng = data_stream(5, 0, 0);
        let draws = 200_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..draws {
            let s = env.draw_sample(&mut rng);
            acc += &s.x[0] * s.x[0].transpose();
        }
        acc /= draws as f64;
        for i in 0..2 {
            for j in 0..2 {
                let rel = (acc[(i, j)] - r[(i, j)]).abs() / r[(i, j)].abs();
                assert!(rel < 0.03, "entry ({i},{j}): {} vs {}", acc[(i, j)], r[(i, j)]);
            }
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let env = iso_env(4, 3, 1.2, 0.3);
        let a = env.draw_sample(&mut data_stream(3, 2, 17));
        let b = env.draw_sample(&mut data_stream(3, 2, 17));
        assert_eq!(a, b);
    }

    #[test]
    fn non_spd_covariance_rejected() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = NodeEnvironment::new(vec![DVector::zeros(2)], vec![r], vec![0.1]).unwrap_err();
        assert_eq!(err, SynthError::NotPositiveDefinite(1));
    }

    #[test]
    fn cluster_optima_must_match() {
        let net = ClusteredNetwork::new(2, &[(0, 1)], vec![vec![0, 1]]).unwrap();
        let env = iso_env(2, 2, 1.0, 0.1);
        assert_eq!(env.check_clusters(&net), Err(SynthError::ClusterOptimum(1, 2)));
        env.check_clusters(&net.with_singleton_clusters()).unwrap();
    }
}
