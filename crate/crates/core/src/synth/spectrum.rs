//! Cooperative spectrum sensing with multi-antenna secondary users.
//!
//! Each device is a cluster of fully connected antennas; antennas of devices
//! within communication range are all linked. The parameter vector is the
//! stacked basis weights α = [α_1; …; α_{N_P}] of the primary users' spectra,
//! shared by every node.

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataModel, Sample, SynthError};
use crate::rng::placement_stream;
use crate::topology::{uniform_combiners, ClusteredNetwork, CombinerSet};

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

fn alpha_one() -> Vec<f64> {
    let mut a = vec![0.0; 16];
    a[10..13].copy_from_slice(&[0.4, 0.38, 0.4]);
    a
}

fn alpha_two() -> Vec<f64> {
    let mut a = vec![0.0; 16];
    a[3..6].copy_from_slice(&[0.4, 0.38, 0.4]);
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    /// Secondary users (devices).
    pub n_su: usize,
    /// Antennas per device.
    pub n_antennas: usize,
    pub n_freq: usize,
    pub n_basis: usize,
    /// Gaussian basis width σ_b².
    pub sigma2_b: f64,
    pub noise_std: f64,
    /// Synchronization threshold on the mean path loss. Required.
    pub p0: Option<f64>,
    /// Distance at which the mean path loss equals one.
    pub d_ref: f64,
    /// Fading standard deviation relative to the mean path loss.
    pub fading: f64,
    /// Primary user positions in the unit square.
    pub pu_positions: Vec<[f64; 2]>,
    /// Basis weights per primary user, each of length `n_basis`.
    pub alphas: Vec<Vec<f64>>,
    /// Device link range.
    pub comm_radius: f64,
    /// Minimum device distance to any primary user.
    pub min_pu_distance: f64,
    pub seed: u64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            n_su: 10,
            n_antennas: 1,
            n_freq: 80,
            n_basis: 16,
            sigma2_b: 0.0025,
            noise_std: 0.01,
            p0: None,
            d_ref: 0.15,
            fading: 0.2,
            pu_positions: vec![[0.15, 0.5], [0.85, 0.5]],
            alphas: vec![alpha_one(), alpha_two()],
            comm_radius: 0.4,
            min_pu_distance: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumScenario {
    pub params: SpectrumParams,
    pub network: ClusteredNetwork,
    /// Uniform A, C and P.
    pub combiners: CombinerSet,
    pub device_positions: Vec<Vector2<f64>>,
    /// N_F × N_B basis matrix Φ.
    pub basis: DMatrix<f64>,
    /// Mean path loss p̄_{k,q}, devices × primary users.
    pub path_loss: DMatrix<f64>,
    /// Thresholded estimate p̂_{k,q}.
    pub estimated_path_loss: DMatrix<f64>,
    truth: Vec<DVector<f64>>,
    /// Φ α_q per primary user, length N_F.
    spectra: Vec<DVector<f64>>,
}

/// Φ_{jm} = exp(−(f_j − c_m)² / 2σ_b²) with f_j and c_m evenly spaced on [0, 1].
pub fn gaussian_basis(n_freq: usize, n_basis: usize, sigma2_b: f64) -> DMatrix<f64> {
    let grid = |i: usize, count: usize| if count == 1 { 0.5 } else { i as f64 / (count - 1) as f64 };
    DMatrix::from_fn(n_freq, n_basis, |j, m| {
        let df = grid(j, n_freq) - grid(m, n_basis);
        (-df * df / (2.0 * sigma2_b)).exp()
    })
}

fn check(params: &SpectrumParams) -> Result<f64, SynthError> {
    let bad = |what: String| SynthError::Parameter(format!("spectrum: {what}"));
    let p0 = params.p0.ok_or_else(|| bad("p0 is required".into()))?;
    if !(p0 >= 0.0 && p0.is_finite()) {
        return Err(bad("p0 must be nonnegative".into()));
    }
    if params.n_su == 0 || params.n_antennas == 0 || params.n_freq == 0 || params.n_basis == 0 {
        return Err(bad("counts must be positive".into()));
    }
    if params.pu_positions.is_empty() || params.pu_positions.len() != params.alphas.len() {
        return Err(bad(format!(
            "{} primary user positions but {} weight vectors",
            params.pu_positions.len(),
            params.alphas.len()
        )));
    }
    if let Some(a) = params.alphas.iter().find(|a| a.len() != params.n_basis) {
        return Err(bad(format!("weight vector of length {} but n_basis is {}", a.len(), params.n_basis)));
    }
    for (name, v) in [
        ("sigma2_b", params.sigma2_b),
        ("d_ref", params.d_ref),
        ("comm_radius", params.comm_radius),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(bad(format!("{name} must be positive")));
        }
    }
    if !(params.noise_std >= 0.0) || !(params.fading >= 0.0) || !(params.min_pu_distance >= 0.0) {
        return Err(bad("noise_std, fading and min_pu_distance must be nonnegative".into()));
    }
    Ok(p0)
}

fn device_graph_connected(positions: &[Vector2<f64>], range: f64) -> bool {
    let n = positions.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(k) = stack.pop() {
        for l in 0..n {
            if !seen[l] && (positions[k] - positions[l]).norm() <= range {
                seen[l] = true;
                stack.push(l);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Builds the scenario. Device positions depend only on `params.seed`,
/// not on the number of antennas.
pub fn spectrum_env(params: &SpectrumParams) -> Result<SpectrumScenario, SynthError> {
    let p0 = check(params)?;
    let pus: Vec<Vector2<f64>> = params.pu_positions.iter().map(|p| Vector2::new(p[0], p[1])).collect();
    let mut rng = placement_stream(params.seed);
    let mut device_positions = None;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut pos = Vec::with_capacity(params.n_su);
        while pos.len() < params.n_su {
            let p = Vector2::new(rng.random::<f64>(), rng.random::<f64>());
            if pus.iter().all(|u| (u - p).norm() >= params.min_pu_distance) {
                pos.push(p);
            }
        }
        if device_graph_connected(&pos, params.comm_radius) {
            device_positions = Some(pos);
            break;
        }
    }
    let device_positions = device_positions
        .ok_or_else(|| SynthError::Parameter("spectrum: could not place a connected set of devices".into()))?;

    let n_su = params.n_su;
    let n_r = params.n_antennas;
    let n = n_su * n_r;
    let mut edges = Vec::new();
    for a in 0..n_su {
        for b in a..n_su {
            let linked = a == b || (device_positions[a] - device_positions[b]).norm() <= params.comm_radius;
            if !linked {
                continue;
            }
            for i in 0..n_r {
                for j in 0..n_r {
                    let (k, l) = (a * n_r + i, b * n_r + j);
                    if k < l {
                        edges.push((k, l));
                    }
                }
            }
        }
    }
    let clusters = (0..n_su).map(|a| (a * n_r..(a + 1) * n_r).collect()).collect();
    let network = ClusteredNetwork::new(n, &edges, clusters)?;
    let combiners = uniform_combiners(&network);

    let n_pu = pus.len();
    let path_loss = DMatrix::from_fn(n_su, n_pu, |k, q| {
        let dist = (device_positions[k] - pus[q]).norm();
        (params.d_ref / dist).powi(2)
    });
    let estimated_path_loss = path_loss.map(|p| if p >= p0 { p } else { 0.0 });

    let basis = gaussian_basis(params.n_freq, params.n_basis, params.sigma2_b);
    let alpha = DVector::from_iterator(n_pu * params.n_basis, params.alphas.iter().flatten().copied());
    let spectra = params.alphas.iter().map(|a| &basis * DVector::from_column_slice(a)).collect();

    Ok(SpectrumScenario {
        params: params.clone(),
        network,
        combiners,
        device_positions,
        basis,
        path_loss,
        estimated_path_loss,
        truth: vec![alpha; n],
        spectra,
    })
}

impl SpectrumScenario {
    pub fn device_of(&self, node: usize) -> usize {
        node / self.params.n_antennas
    }

    /// Estimated power spectrum Σ_q (Φ w_q) from a stacked weight vector.
    pub fn spectrum_estimate(&self, w: &DVector<f64>) -> DVector<f64> {
        let nb = self.params.n_basis;
        let mut out = DVector::zeros(self.params.n_freq);
        for q in 0..self.spectra.len() {
            out += &self.basis * w.rows(q * nb, nb);
        }
        out
    }
}

impl DataModel for SpectrumScenario {
    fn n_nodes(&self) -> usize {
        self.truth.len()
    }

    fn dim(&self) -> usize {
        self.truth[0].len()
    }

    fn truth(&self) -> &[DVector<f64>] {
        &self.truth
    }

    /// One frequency bin j per node, uniform; regressor [p̂_{k,1}Φ_j, …, p̂_{k,N_P}Φ_j]
    /// and reference Σ_q (p̄_{k,q} + δp) Φ_j α_q + z.
    fn draw(&self, rng: &mut dyn RngCore) -> Sample {
        let nb = self.params.n_basis;
        let n_pu = self.spectra.len();
        let mut x = Vec::with_capacity(self.truth.len());
        let mut d = Vec::with_capacity(self.truth.len());
        for node in 0..self.truth.len() {
            let dev = self.device_of(node);
            let j = rng.random_range(0..self.params.n_freq);
            let mut xk = DVector::zeros(n_pu * nb);
            let mut dk = 0.0;
            for q in 0..n_pu {
                let p_hat = self.estimated_path_loss[(dev, q)];
                if p_hat != 0.0 {
                    for m in 0..nb {
                        xk[q * nb + m] = p_hat * self.basis[(j, m)];
                    }
                }
                let p_bar = self.path_loss[(dev, q)];
                let g: f64 = StandardNormal.sample(rng);
                dk += (p_bar + self.params.fading * p_bar * g) * self.spectra[q][j];
            }
            let z: f64 = StandardNormal.sample(rng);
            d.push(dk + self.params.noise_std * z);
            x.push(xk);
        }
        Sample { x, d }
    }
}
