//! Ten-node, four-cluster reference network with two-dimensional optima.

use nalgebra::{DMatrix, DVector};

use super::NodeEnvironment;
use crate::topology::ClusteredNetwork;

/// σ²_{x,k} per node.
pub const ILLUSTRATIVE_REGRESSOR_VARIANCES: [f64; 10] = [1.0, 1.1, 0.9, 1.2, 0.8, 1.0, 1.1, 0.9, 1.0, 1.2];

/// σ²_{z,k} per node.
pub const ILLUSTRATIVE_NOISE_VARIANCES: [f64; 10] = [0.10, 0.12, 0.08, 0.11, 0.09, 0.10, 0.13, 0.07, 0.10, 0.12];

const BASE: [f64; 2] = [0.5, -0.4];

const OFFSETS: [[f64; 2]; 4] = [[0.0287, -0.005], [0.0234, 0.005], [-0.0335, 0.0029], [0.0224, 0.00347]];

// 0-based. Clusters are internally complete; the remaining links join clusters.
const EDGES: [(usize, usize); 14] = [
    (0, 1),
    (0, 2),
    (1, 2),
    (3, 4),
    (3, 5),
    (4, 5),
    (6, 7),
    (8, 9),
    (2, 3),
    (1, 6),
    (0, 7),
    (5, 9),
    (4, 8),
    (7, 8),
];

/// Network with clusters {1,2,3}, {4,5,6}, {7,8}, {9,10} and its environment.
pub fn illustrative_env() -> (ClusteredNetwork, NodeEnvironment) {
    let clusters = vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7], vec![8, 9]];
    let network = ClusteredNetwork::new(10, &EDGES, clusters).expect("static topology is valid");

    let optima: Vec<DVector<f64>> = OFFSETS
        .iter()
        .map(|d| DVector::from_vec(vec![BASE[0] + d[0], BASE[1] + d[1]]))
        .collect();
    let w_star = (0..10).map(|k| optima[network.cluster_of(k)].clone()).collect();
    let r_x = ILLUSTRATIVE_REGRESSOR_VARIANCES
        .iter()
        .map(|&s| DMatrix::identity(2, 2) * s)
        .collect();
    let env = NodeEnvironment::new(w_star, r_x, ILLUSTRATIVE_NOISE_VARIANCES.to_vec())
        .expect("static environment is valid");
    (network, env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_clusters() {
        let (net, env) = illustrative_env();
        assert_eq!(net.n_nodes(), 10);
        assert_eq!(net.n_clusters(), 4);
        assert_eq!(env.dim(), 2);
        env.check_clusters(&net).unwrap();
    }

    #[test]
    fn first_cluster_optimum() {
        let (_, env) = illustrative_env();
        let w = &env.w_star()[0];
        assert!((w[0] - 0.5287).abs() < 1e-15);
        assert!((w[1] + 0.405).abs() < 1e-15);
        assert_eq!(env.w_star()[0], env.w_star()[1]);
        assert_eq!(env.w_star()[1], env.w_star()[2]);
    }
}
