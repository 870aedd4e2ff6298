//! JSON document form of a network and its combiners.
//!
//! ```json
//! {
//!   "n_nodes": 3,
//!   "edges": [[1, 2], [2, 3]],
//!   "clusters": [[1, 2], [3]],
//!   "A": {"mode": "uniform"},
//!   "C": {"mode": "identity"},
//!   "P": {"mode": "uniform", "zero_rows": [3]}
//! }
//! ```
//!
//! Ids are 1-based. Explicit matrices are lists of rows.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{identity_exchange, uniform_combiners, validate, ClusteredNetwork, CombinerSet, TopologyError, ValidationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum MatrixRule {
    Uniform,
    Identity,
    Metropolis,
    Explicit { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegularizerRule {
    Uniform {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        zero_rows: Vec<usize>,
    },
    Metropolis {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        zero_rows: Vec<usize>,
    },
    Explicit {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        zero_rows: Vec<usize>,
    },
}

impl Default for RegularizerRule {
    fn default() -> Self {
        RegularizerRule::Uniform { zero_rows: Vec::new() }
    }
}

fn uniform_rule() -> MatrixRule {
    MatrixRule::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub n_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub clusters: Vec<Vec<usize>>,
    #[serde(rename = "A", default = "uniform_rule")]
    pub a: MatrixRule,
    #[serde(rename = "C", default = "uniform_rule")]
    pub c: MatrixRule,
    #[serde(rename = "P", default)]
    pub p: RegularizerRule,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DocumentError {
    #[error("{key}: {message}")]
    Schema { key: String, message: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

fn schema(key: &str, message: impl Into<String>) -> DocumentError {
    DocumentError::Schema { key: key.to_string(), message: message.into() }
}

fn one_based(key: &str, id: usize, n: usize) -> Result<usize, DocumentError> {
    if id == 0 || id > n {
        Err(schema(key, format!("id {id} is outside 1..={n}")))
    } else {
        Ok(id - 1)
    }
}

fn explicit(key: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, DocumentError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(schema(key, format!("explicit matrix must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl NetworkDocument {
    pub fn network(&self) -> Result<ClusteredNetwork, DocumentError> {
        let n = self.n_nodes;
        let edges = self
            .edges
            .iter()
            .map(|&[a, b]| Ok((one_based("edges", a, n)?, one_based("edges", b, n)?)))
            .collect::<Result<Vec<_>, DocumentError>>()?;
        let clusters = self
            .clusters
            .iter()
            .map(|members| members.iter().map(|&k| one_based("clusters", k, n)).collect())
            .collect::<Result<Vec<Vec<usize>>, DocumentError>>()?;
        Ok(ClusteredNetwork::new(n, &edges, clusters)?)
    }

    /// Builds the network and combiners, then validates them.
    pub fn build(&self) -> Result<(ClusteredNetwork, CombinerSet), DocumentError> {
        let network = self.network()?;
        let n = network.n_nodes();
        let uniform = uniform_combiners(&network);

        let a = match &self.a {
            MatrixRule::Uniform => uniform.a.clone(),
            MatrixRule::Identity => DMatrix::identity(n, n),
            MatrixRule::Metropolis => return Err(schema("A.mode", "\"metropolis\" is reserved but not implemented")),
            MatrixRule::Explicit { matrix } => explicit("A.matrix", matrix, n)?,
        };
        let c = match &self.c {
            MatrixRule::Uniform => uniform.c.clone(),
            MatrixRule::Identity => identity_exchange(&network),
            MatrixRule::Metropolis => return Err(schema("C.mode", "\"metropolis\" is reserved but not implemented")),
            MatrixRule::Explicit { matrix } => explicit("C.matrix", matrix, n)?,
        };
        let (p, zero_rows) = match &self.p {
            RegularizerRule::Uniform { zero_rows } => (uniform.p.clone(), zero_rows),
            RegularizerRule::Metropolis { .. } => {
                return Err(schema("P.mode", "\"metropolis\" is reserved but not implemented"))
            }
            RegularizerRule::Explicit { matrix, zero_rows } => (explicit("P.matrix", matrix, n)?, zero_rows),
        };
        let zero_rows = zero_rows
            .iter()
            .map(|&k| one_based("P.zero_rows", k, n))
            .collect::<Result<Vec<_>, _>>()?;

        let mut combiners = CombinerSet { a, c, p, p_zero_rows: BTreeSet::new() };
        if matches!(self.p, RegularizerRule::Uniform { .. }) {
            combiners = combiners.with_zero_p_rows(zero_rows);
        } else {
            combiners.p_zero_rows = zero_rows.into_iter().collect();
        }
        validate(&network, &combiners)?;
        Ok((network, combiners))
    }

    /// Explicit-mode document reproducing `network` and `combiners` exactly.
    pub fn explicit(network: &ClusteredNetwork, combiners: &CombinerSet) -> Self {
        Self {
            n_nodes: network.n_nodes(),
            edges: network.edges().into_iter().map(|(a, b)| [a + 1, b + 1]).collect(),
            clusters: network
                .clusters()
                .iter()
                .map(|m| m.iter().map(|k| k + 1).collect())
                .collect(),
            a: MatrixRule::Explicit { matrix: rows_of(&combiners.a) },
            c: MatrixRule::Explicit { matrix: rows_of(&combiners.c) },
            p: RegularizerRule::Explicit {
                matrix: rows_of(&combiners.p),
                zero_rows: combiners.p_zero_rows.iter().map(|k| k + 1).collect(),
            },
        }
    }
}
