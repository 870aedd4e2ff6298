//! Non-point target localization: clusters of nodes look at consecutive arc
//! points of a circle and measure noisy projections along their bearing.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataModel, NodeEnvironment, Sample, SynthError};
use crate::rng::placement_stream;
use crate::topology::{uniform_combiners, ClusteredNetwork, CombinerSet};

const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Uniform,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationParams {
    pub n_clusters: usize,
    pub nodes_per_cluster: usize,
    /// Arc radius R.
    pub radius: f64,
    pub center: [f64; 2],
    /// Angle of the first arc edge, radians.
    pub arc_start: f64,
    /// Total angle covered by all clusters, radians.
    pub arc_span: f64,
    /// Node distances from the center, as multiples of R.
    pub inner: f64,
    pub outer: f64,
    /// Link range, as a multiple of R.
    pub comm_radius: f64,
    pub placement: Placement,
    pub sigma2_v: f64,
    pub sigma2_alpha: f64,
    pub sigma2_beta: f64,
    pub seed: u64,
}

impl Default for LocalizationParams {
    fn default() -> Self {
        Self {
            n_clusters: 10,
            nodes_per_cluster: 10,
            radius: 1.0,
            center: [0.0, 0.0],
            arc_start: PI / 4.0,
            arc_span: PI / 2.0,
            inner: 3.0,
            outer: 4.0,
            comm_radius: 0.6,
            placement: Placement::Uniform,
            sigma2_v: 0.5,
            sigma2_alpha: 0.1,
            sigma2_beta: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalizationScenario {
    pub params: LocalizationParams,
    pub network: ClusteredNetwork,
    /// Uniform A, C = I, uniform P with zero rows on the two boundary clusters.
    pub combiners: CombinerSet,
    pub positions: Vec<Vector2<f64>>,
    /// Arc point seen by each cluster.
    pub targets: Vec<Vector2<f64>>,
    truth: Vec<DVector<f64>>,
    bearing: Vec<Vector2<f64>>,
    normal: Vec<Vector2<f64>>,
}

/// Largest divisor of m not above √m.
fn radial_rows(m: usize) -> usize {
    (1..=m).take_while(|d| d * d <= m).filter(|d| m % d == 0).last().unwrap_or(1)
}

fn polar(center: Vector2<f64>, r: f64, theta: f64) -> Vector2<f64> {
    center + Vector2::new(r * theta.cos(), r * theta.sin())
}

fn check(params: &LocalizationParams) -> Result<(), SynthError> {
    let bad = |what: &str| Err(SynthError::Parameter(format!("localization: {what}")));
    if params.n_clusters == 0 || params.nodes_per_cluster == 0 {
        return bad("n_clusters and nodes_per_cluster must be positive");
    }
    if !(params.radius > 0.0) || !(params.arc_span > 0.0) || !(params.comm_radius > 0.0) {
        return bad("radius, arc_span and comm_radius must be positive");
    }
    if !(params.inner > 0.0 && params.outer >= params.inner) {
        return bad("need 0 < inner <= outer");
    }
    for (name, v) in [("sigma2_v", params.sigma2_v), ("sigma2_alpha", params.sigma2_alpha), ("sigma2_beta", params.sigma2_beta)] {
        if !(v >= 0.0 && v.is_finite()) {
            return bad(&format!("{name} must be nonnegative"));
        }
    }
    Ok(())
}

fn place(params: &LocalizationParams, rng: &mut dyn RngCore) -> Vec<Vector2<f64>> {
    let center = Vector2::new(params.center[0], params.center[1]);
    let width = params.arc_span / params.n_clusters as f64;
    let (r_in, r_out) = (params.inner * params.radius, params.outer * params.radius);
    let m = params.nodes_per_cluster;
    let mut out = Vec::with_capacity(m * params.n_clusters);
    for q in 0..params.n_clusters {
        let lo = params.arc_start + q as f64 * width;
        match params.placement {
            Placement::Uniform => {
                let rows = radial_rows(m);
                let cols = m / rows;
                for i in 0..rows {
                    let r = r_in + (i as f64 + 0.5) / rows as f64 * (r_out - r_in);
                    for j in 0..cols {
                        let theta = lo + (j as f64 + 0.5) / cols as f64 * width;
                        out.push(polar(center, r, theta));
                    }
                }
            }
            Placement::Random => {
                for _ in 0..m {
                    // Uniform in area over the annular sector.
                    let s: f64 = rng.random();
                    let r = (r_in * r_in + s * (r_out * r_out - r_in * r_in)).sqrt();
                    let theta = lo + rng.random::<f64>() * width;
                    out.push(polar(center, r, theta));
                }
            }
        }
    }
    out
}

/// Builds the scenario. Random placements are redrawn until the graph is connected.
pub fn localization_env(params: &LocalizationParams) -> Result<LocalizationScenario, SynthError> {
    check(params)?;
    let q_count = params.n_clusters;
    let m = params.nodes_per_cluster;
    let n = q_count * m;
    let center = Vector2::new(params.center[0], params.center[1]);
    let width = params.arc_span / q_count as f64;
    let targets: Vec<Vector2<f64>> = (0..q_count)
        .map(|q| polar(center, params.radius, params.arc_start + (q as f64 + 0.5) * width))
        .collect();
    let clusters: Vec<Vec<usize>> = (0..q_count).map(|q| (q * m..(q + 1) * m).collect()).collect();
    let range = params.comm_radius * params.radius;

    let mut rng = placement_stream(params.seed);
    let mut last_err = None;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let positions = place(params, &mut rng);
        if let Some(k) = (0..n).find(|&k| (positions[k] - targets[k / m]).norm() < 1e-12) {
            return Err(SynthError::Parameter(format!("node {} coincides with its target", k + 1)));
        }
        let mut edges = Vec::new();
        for k in 0..n {
            for l in k + 1..n {
                if (k / m).abs_diff(l / m) <= 1 && (positions[k] - positions[l]).norm() <= range {
                    edges.push((k, l));
                }
            }
        }
        match ClusteredNetwork::new(n, &edges, clusters.clone()) {
            Ok(network) => {
                let boundary = clusters[0].iter().chain(&clusters[q_count - 1]).copied();
                let mut combiners = uniform_combiners(&network).with_zero_p_rows(boundary);
                combiners.c = DMatrix::identity(n, n);
                let (bearing, normal): (Vec<_>, Vec<_>) = (0..n)
                    .map(|k| {
                        let u = (targets[k / m] - positions[k]).normalize();
                        (u, Vector2::new(-u.y, u.x))
                    })
                    .unzip();
                let truth = (0..n).map(|k| DVector::from_column_slice(targets[k / m].as_slice())).collect();
                return Ok(LocalizationScenario {
                    params: params.clone(),
                    network,
                    combiners,
                    positions,
                    targets,
                    truth,
                    bearing,
                    normal,
                });
            }
            Err(e) => {
                if params.placement == Placement::Uniform {
                    return Err(e.into());
                }
                last_err = Some(e);
            }
        }
    }
    Err(last_err.expect("at least one attempt").into())
}

impl LocalizationScenario {
    /// Unit bearing u_k from node k to its cluster's target.
    pub fn bearing(&self, k: usize) -> Vector2<f64> {
        self.bearing[k]
    }

    /// Second-order moments R_x = (1 + σ²_β) uuᵀ + σ²_α u⊥u⊥ᵀ with σ²_z = σ²_v.
    pub fn moments(&self) -> NodeEnvironment {
        let p = &self.params;
        let r_x = (0..self.truth.len())
            .map(|k| {
                let u = self.bearing[k];
                let v = self.normal[k];
                let r = u * u.transpose() * (1.0 + p.sigma2_beta) + v * v.transpose() * p.sigma2_alpha;
                DMatrix::from_column_slice(2, 2, r.as_slice())
            })
            .collect();
        NodeEnvironment::new(self.truth.clone(), r_x, vec![p.sigma2_v; self.truth.len()])
            .expect("moments of a valid scenario are positive-definite")
    }
}

impl DataModel for LocalizationScenario {
    fn n_nodes(&self) -> usize {
        self.truth.len()
    }

    fn dim(&self) -> usize {
        2
    }

    fn truth(&self) -> &[DVector<f64>] {
        &self.truth
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Sample {
        let p = &self.params;
        let (sa, sb, sv) = (p.sigma2_alpha.sqrt(), p.sigma2_beta.sqrt(), p.sigma2_v.sqrt());
        let mut x = Vec::with_capacity(self.truth.len());
        let mut d = Vec::with_capacity(self.truth.len());
        for k in 0..self.truth.len() {
            let alpha = sa * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            let beta = sb * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            let noise: f64 = StandardNormal.sample(rng);
            let u = self.bearing[k] * (1.0 + beta) + self.normal[k] * alpha;
            let xk = DVector::from_column_slice(u.as_slice());
            d.push(xk.dot(&self.truth[k]) + sv * noise);
            x.push(xk);
        }
        Sample { x, d }
    }
}
