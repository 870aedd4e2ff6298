//! Network graph, cluster partition and the combiner / regularizer matrices.
//!
//! Node and cluster indices are 0-based in the Rust API. Human-facing text
//! (violation messages, JSON documents) uses 1-based ids.

mod document;

pub use document::{DocumentError, MatrixRule, NetworkDocument, RegularizerRule};

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used by [`validate`] for stochasticity checks.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("network must contain at least one node")]
    Empty,
    #[error("edge ({0}, {1}) references a node outside 1..={2}")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("node {0} appears in more than one cluster")]
    DuplicateMember(usize),
    #[error("node {0} is not assigned to any cluster")]
    Unassigned(usize),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("cluster member {0} is outside 1..={1}")]
    MemberOutOfRange(usize, usize),
    #[error("network is disconnected: node {0} is unreachable from node 1")]
    Disconnected(usize),
    #[error("adjacency is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
}

/// A connected undirected network with a partition of its nodes into clusters.
///
/// The adjacency relation is stored as sorted neighbor lists; every node is
/// its own neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredNetwork {
    neighbors: Vec<Vec<usize>>,
    clusters: Vec<Vec<usize>>,
    cluster_of: Vec<usize>,
}

impl ClusteredNetwork {
    /// Builds a network from an undirected edge list and a cluster partition.
    ///
    /// Self loops are implicit; listing them is harmless.
    pub fn new(
        n_nodes: usize,
        edges: &[(usize, usize)],
        clusters: Vec<Vec<usize>>,
    ) -> Result<Self, TopologyError> {
        if n_nodes == 0 {
            return Err(TopologyError::Empty);
        }
        let mut neighbors: Vec<Vec<usize>> = (0..n_nodes).map(|k| vec![k]).collect();
        for &(a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(TopologyError::EdgeOutOfRange(a + 1, b + 1, n_nodes));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self::from_neighbors(neighbors, clusters)
    }

    /// Builds a network from a full boolean adjacency relation.
    pub fn from_adjacency(adjacency: &[Vec<bool>], clusters: Vec<Vec<usize>>) -> Result<Self, TopologyError> {
        let n = adjacency.len();
        let mut edges = Vec::new();
        for k in 0..n {
            for l in 0..n {
                if adjacency[k][l] != adjacency[l][k] {
                    return Err(TopologyError::Asymmetric(k + 1, l + 1));
                }
                if l > k && adjacency[k][l] {
                    edges.push((k, l));
                }
            }
        }
        Self::new(n, &edges, clusters)
    }

    fn from_neighbors(neighbors: Vec<Vec<usize>>, clusters: Vec<Vec<usize>>) -> Result<Self, TopologyError> {
        let n = neighbors.len();
        let mut cluster_of = vec![usize::MAX; n];
        let mut sorted_clusters = Vec::with_capacity(clusters.len());
        for (q, members) in clusters.into_iter().enumerate() {
            if members.is_empty() {
                return Err(TopologyError::EmptyCluster(q + 1));
            }
            let mut members = members;
            members.sort_unstable();
            for &k in &members {
                if k >= n {
                    return Err(TopologyError::MemberOutOfRange(k + 1, n));
                }
                if cluster_of[k] != usize::MAX {
                    return Err(TopologyError::DuplicateMember(k + 1));
                }
                cluster_of[k] = q;
            }
            sorted_clusters.push(members);
        }
        if let Some(k) = cluster_of.iter().position(|&c| c == usize::MAX) {
            return Err(TopologyError::Unassigned(k + 1));
        }

        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for &l in &neighbors[k] {
                if !seen[l] {
                    seen[l] = true;
                    queue.push_back(l);
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(TopologyError::Disconnected(k + 1));
        }

        Ok(Self { neighbors, clusters: sorted_clusters, cluster_of })
    }

    /// Same graph, every node in its own cluster.
    pub fn with_singleton_clusters(&self) -> Self {
        let clusters = (0..self.n_nodes()).map(|k| vec![k]).collect();
        Self::from_neighbors(self.neighbors.clone(), clusters).expect("graph already validated")
    }

    /// Same graph, one cluster holding every node.
    pub fn with_single_cluster(&self) -> Self {
        let clusters = vec![(0..self.n_nodes()).collect()];
        Self::from_neighbors(self.neighbors.clone(), clusters).expect("graph already validated")
    }

    /// Same graph with a different partition.
    pub fn with_clusters(&self, clusters: Vec<Vec<usize>>) -> Result<Self, TopologyError> {
        Self::from_neighbors(self.neighbors.clone(), clusters)
    }

    pub fn n_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster_of(&self, k: usize) -> usize {
        self.cluster_of[k]
    }

    pub fn is_adjacent(&self, k: usize, l: usize) -> bool {
        self.neighbors[k].binary_search(&l).is_ok()
    }

    /// 𝒩_k, including k itself, in ascending order.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// 𝒩_k ∩ 𝒞(k).
    pub fn intra_neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.cluster_of[k];
        self.neighbors[k]
            .iter()
            .copied()
            .filter(move |&l| self.cluster_of[l] == c)
    }

    /// 𝒩_k \ 𝒞(k).
    pub fn inter_neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.cluster_of[k];
        self.neighbors[k]
            .iter()
            .copied()
            .filter(move |&l| self.cluster_of[l] != c)
    }

    /// Undirected edge list (k < l), 0-based.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(k, list)| list.iter().filter(move |&&l| l > k).map(move |&l| (k, l)))
            .collect()
    }
}

/// Combination matrix A, measurement-exchange matrix C and regularization
/// weights P, all N×N.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerSet {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// Rows of P that are required to be all zero.
    pub p_zero_rows: BTreeSet<usize>,
}

impl CombinerSet {
    /// Zeroes the given rows of P and flags them so `validate` expects a
    /// zero sum there.
    pub fn with_zero_p_rows(mut self, rows: impl IntoIterator<Item = usize>) -> Self {
        for k in rows {
            self.p.row_mut(k).fill(0.0);
            self.p_zero_rows.insert(k);
        }
        self
    }

    pub fn with_exchange(mut self, c: DMatrix<f64>) -> Self {
        self.c = c;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixName {
    A,
    C,
    P,
}

impl fmt::Display for MatrixName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MatrixName::A => "A",
            MatrixName::C => "C",
            MatrixName::P => "P",
        };
        f.write_str(s)
    }
}

/// A violated combiner invariant. Indices are 0-based; `Display` prints 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Negative { matrix: MatrixName, row: usize, col: usize, value: f64 },
    ColumnSum { matrix: MatrixName, col: usize, sum: f64 },
    RowSum { matrix: MatrixName, row: usize, sum: f64, expected: f64 },
    Support { matrix: MatrixName, row: usize, col: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Negative { matrix, row, col, value } => {
                write!(f, "entry ({}, {}) of {matrix} is negative ({value})", row + 1, col + 1)
            }
            Violation::ColumnSum { matrix, col, sum } => {
                write!(f, "column {} of {matrix} sums to {sum}", col + 1)
            }
            Violation::RowSum { matrix, row, sum, expected } => {
                write!(f, "row {} of {matrix} sums to {sum}, expected {expected}", row + 1)
            }
            Violation::Support { matrix, row, col, value } => write!(
                f,
                "entry ({}, {}) of {matrix} is {value} outside its allowed support",
                row + 1,
                col + 1
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("matrix {matrix} is {rows}x{cols}, expected {n}x{n}")]
    Dimension { matrix: MatrixName, rows: usize, cols: usize, n: usize },
    #[error("zero-row flag {0} is outside 1..={1}")]
    ZeroRowOutOfRange(usize, usize),
    #[error("{0}")]
    Violation(Violation),
}

impl ValidationError {
    pub fn is_structural(&self) -> bool {
        !matches!(self, ValidationError::Violation(_))
    }
}

/// Checks dimensions, nonnegativity, support rules and stochasticity of a
/// combiner set against a network, reporting the first violation found.
pub fn validate(network: &ClusteredNetwork, combiners: &CombinerSet) -> Result<(), ValidationError> {
    let n = network.n_nodes();
    for (name, m) in [
        (MatrixName::A, &combiners.a),
        (MatrixName::C, &combiners.c),
        (MatrixName::P, &combiners.p),
    ] {
        if m.nrows() != n || m.ncols() != n {
            return Err(ValidationError::Dimension { matrix: name, rows: m.nrows(), cols: m.ncols(), n });
        }
    }
    if let Some(&k) = combiners.p_zero_rows.iter().find(|&&k| k >= n) {
        return Err(ValidationError::ZeroRowOutOfRange(k + 1, n));
    }
    let violation = |v| Err(ValidationError::Violation(v));

    for (name, m) in [
        (MatrixName::A, &combiners.a),
        (MatrixName::C, &combiners.c),
        (MatrixName::P, &combiners.p),
    ] {
        for row in 0..n {
            for col in 0..n {
                let value = m[(row, col)];
                if value < 0.0 || !value.is_finite() {
                    return violation(Violation::Negative { matrix: name, row, col, value });
                }
            }
        }
    }

    // a_{lk} may be nonzero only for l in N_k ∩ C(k); columns sum to one.
    let same_cluster = |k: usize, l: usize| network.cluster_of(k) == network.cluster_of(l);
    for k in 0..n {
        for l in 0..n {
            let value = combiners.a[(l, k)];
            if value != 0.0 && !(network.is_adjacent(k, l) && same_cluster(k, l)) {
                return violation(Violation::Support { matrix: MatrixName::A, row: l, col: k, value });
            }
        }
        let sum = combiners.a.column(k).sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return violation(Violation::ColumnSum { matrix: MatrixName::A, col: k, sum });
        }
    }

    // c_{lk} may be nonzero only for k in N_l ∩ C(l); rows sum to one.
    for l in 0..n {
        for k in 0..n {
            let value = combiners.c[(l, k)];
            if value != 0.0 && !(network.is_adjacent(l, k) && same_cluster(l, k)) {
                return violation(Violation::Support { matrix: MatrixName::C, row: l, col: k, value });
            }
        }
        let sum = combiners.c.row(l).sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return violation(Violation::RowSum { matrix: MatrixName::C, row: l, sum, expected: 1.0 });
        }
    }

    // rho_{kl} may be nonzero only for l in N_k \ C(k). Rows sum to one unless
    // flagged as zero rows or the support set is empty.
    for k in 0..n {
        for l in 0..n {
            let value = combiners.p[(k, l)];
            if value != 0.0 && !(network.is_adjacent(k, l) && !same_cluster(k, l)) {
                return violation(Violation::Support { matrix: MatrixName::P, row: k, col: l, value });
            }
        }
        let sum = combiners.p.row(k).sum();
        let expect_zero =
            combiners.p_zero_rows.contains(&k) || network.inter_neighbors(k).next().is_none();
        let expected = if expect_zero { 0.0 } else { 1.0 };
        if (sum - expected).abs() > SUM_TOLERANCE {
            return violation(Violation::RowSum { matrix: MatrixName::P, row: k, sum, expected });
        }
    }
    Ok(())
}

/// Averaging-rule combiners restricted to each node's cluster, with uniform
/// regularization weights over extra-cluster neighbors.
pub fn uniform_combiners(network: &ClusteredNetwork) -> CombinerSet {
    let n = network.n_nodes();
    let mut a = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    let mut p = DMatrix::zeros(n, n);
    for k in 0..n {
        let intra: Vec<usize> = network.intra_neighbors(k).collect();
        let w = 1.0 / intra.len() as f64;
        for &l in &intra {
            a[(l, k)] = w;
            // Row k of C spreads over N_k ∩ C(k) as well.
            c[(k, l)] = w;
        }
        let inter: Vec<usize> = network.inter_neighbors(k).collect();
        if !inter.is_empty() {
            let w = 1.0 / inter.len() as f64;
            for &l in &inter {
                p[(k, l)] = w;
            }
        }
    }
    CombinerSet { a, c, p, p_zero_rows: BTreeSet::new() }
}

/// Identity measurement-exchange matrix.
pub fn identity_exchange(network: &ClusteredNetwork) -> DMatrix<f64> {
    DMatrix::identity(network.n_nodes(), network.n_nodes())
}
