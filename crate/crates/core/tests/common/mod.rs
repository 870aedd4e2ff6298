#![allow(dead_code)]

use std::collections::BTreeSet;

use clustered_diffusion::synth::{NodeEnvironment, Sample};
use clustered_diffusion::topology::{ClusteredNetwork, CombinerSet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random connected graph on `n` nodes: a random spanning tree plus extra edges.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for k in 1..n {
        edges.push((rng.random_range(0..k), k));
    }
    for k in 0..n {
        for l in k + 1..n {
            if rng.random_bool(0.3) {
                edges.push((k, l));
            }
        }
    }
    edges
}

/// Random partition of 0..n into contiguous blocks.
pub fn random_clusters(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<usize>> {
    let mut clusters = vec![vec![0]];
    for k in 1..n {
        if rng.random_bool(0.5) {
            clusters.push(vec![k]);
        } else {
            clusters.last_mut().unwrap().push(k);
        }
    }
    clusters
}

/// Random left-stochastic A and right-stochastic C supported on intra-cluster
/// links, and random right-stochastic P on extra-cluster links.
pub fn random_combiners(rng: &mut ChaCha8Rng, net: &ClusteredNetwork) -> CombinerSet {
    let n = net.n_nodes();
    let mut a = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    let mut p = DMatrix::zeros(n, n);
    let mut zero_rows = BTreeSet::new();
    for k in 0..n {
        let intra: Vec<usize> = net.intra_neighbors(k).collect();
        let wa: Vec<f64> = intra.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let wc: Vec<f64> = intra.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let (sa, sc): (f64, f64) = (wa.iter().sum(), wc.iter().sum());
        for (i, &l) in intra.iter().enumerate() {
            a[(l, k)] = wa[i] / sa;
            c[(k, l)] = wc[i] / sc;
        }
        let inter: Vec<usize> = net.inter_neighbors(k).collect();
        if inter.is_empty() {
            zero_rows.insert(k);
            continue;
        }
        let wp: Vec<f64> = inter.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let sp: f64 = wp.iter().sum();
        for (i, &l) in inter.iter().enumerate() {
            p[(k, l)] = wp[i] / sp;
        }
    }
    CombinerSet { a, c, p, p_zero_rows: zero_rows }
}

pub fn random_vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-scale..scale))
}

pub fn random_sample(rng: &mut ChaCha8Rng, n: usize, l: usize) -> Sample {
    Sample { x: (0..n).map(|_| random_vector(rng, l, 1.0)).collect(), d: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() }
}

/// Random SPD covariance with eigenvalues in [0.5, 1.5].
pub fn random_covariance(rng: &mut ChaCha8Rng, l: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(l, l, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_fn(l, |_, _| rng.random_range(0.5..1.5)));
    let r = &q * d * q.transpose();
    (&r + r.transpose()) * 0.5
}

/// Random environment whose optima are shared within each cluster.
pub fn random_environment(rng: &mut ChaCha8Rng, net: &ClusteredNetwork, l: usize) -> NodeEnvironment {
    let cluster_opt: Vec<DVector<f64>> = (0..net.n_clusters()).map(|_| random_vector(rng, l, 1.0)).collect();
    let n = net.n_nodes();
    NodeEnvironment::new(
        (0..n).map(|k| cluster_opt[net.cluster_of(k)].clone()).collect(),
        (0..n).map(|_| random_covariance(rng, l)).collect(),
        (0..n).map(|_| rng.random_range(0.01..0.2)).collect(),
    )
    .unwrap()
}

/// A random clustered network instance.
pub fn random_instance(seed: u64, max_n: usize, max_l: usize) -> (ClusteredNetwork, CombinerSet, NodeEnvironment) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n);
    let l = rng.random_range(1..=max_l);
    let edges = random_graph(&mut rng, n);
    let clusters = random_clusters(&mut rng, n);
    let net = ClusteredNetwork::new(n, &edges, clusters).unwrap();
    let comb = random_combiners(&mut rng, &net);
    let env = random_environment(&mut rng, &net, l);
    (net, comb, env)
}
