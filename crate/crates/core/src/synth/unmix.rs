//! Synthetic hyperspectral scene under the linear mixing model Y = MW + V.
//!
//! Endmembers are smooth positive spectra built from Gaussian bumps over a
//! baseline. Abundance maps are piecewise constant over Voronoi regions, one
//! point of the simplex per region. Geometry and spectra come from the
//! placement lane; observation noise from the data lane.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::adapt::UnmixData;
use crate::rng::placement_stream;
use crate::topology::ClusteredNetwork;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnmixParams {
    pub height: usize,
    pub width: usize,
    pub n_endmembers: usize,
    pub n_bands: usize,
    pub snr_db: f64,
    /// Number of constant-abundance regions.
    pub n_regions: usize,
    pub seed: u64,
}

impl Default for UnmixParams {
    fn default() -> Self {
        Self { height: 100, width: 100, n_endmembers: 9, n_bands: 224, snr_db: 20.0, n_regions: 24, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct UnmixEnv {
    pub params: UnmixParams,
    /// L × R endmember matrix.
    pub endmembers: DMatrix<f64>,
    /// Ground-truth abundances, one per pixel in row-major order.
    pub abundances: Vec<DVector<f64>>,
    /// Noise-free pixels M w*.
    pub clean: Vec<DVector<f64>>,
    /// Per-entry noise variance giving the requested SNR.
    pub noise_variance: f64,
    neighbors: Vec<Vec<usize>>,
}

fn endmember(n_bands: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    let baseline = 0.1 + 0.2 * rng.random::<f64>();
    let n_bumps = rng.random_range(2..=4);
    let bumps: Vec<(f64, f64, f64)> = (0..n_bumps)
        .map(|_| {
            let center = rng.random::<f64>();
            let width = 0.03 + 0.12 * rng.random::<f64>();
            let height = 0.3 + 0.7 * rng.random::<f64>();
            (center, width, height)
        })
        .collect();
    let f = |i: usize| if n_bands == 1 { 0.5 } else { i as f64 / (n_bands - 1) as f64 };
    let s = DVector::from_fn(n_bands, |i, _| {
        baseline + bumps.iter().map(|&(c, w, h)| h * (-(f(i) - c).powi(2) / (2.0 * w * w)).exp()).sum::<f64>()
    });
    let peak = s.max();
    s / peak
}

fn simplex_point(r: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    let e = DVector::from_fn(r, |_, _| -> f64 { Exp1.sample(rng) });
    let total = e.sum();
    e / total
}

/// 4-neighbor lattice links in row-major order.
pub fn lattice_neighbors(height: usize, width: usize) -> Vec<Vec<usize>> {
    (0..height * width)
        .map(|k| {
            let (i, j) = (k / width, k % width);
            let mut out = Vec::with_capacity(4);
            if i > 0 {
                out.push(k - width);
            }
            if j > 0 {
                out.push(k - 1);
            }
            if j + 1 < width {
                out.push(k + 1);
            }
            if i + 1 < height {
                out.push(k + width);
            }
            out
        })
        .collect()
}

pub fn unmix_env(params: &UnmixParams) -> Result<UnmixEnv, SynthError> {
    let p = params;
    if p.height == 0 || p.width == 0 || p.n_endmembers == 0 || p.n_bands == 0 || p.n_regions == 0 {
        return Err(SynthError::Parameter("unmix: sizes must be positive".into()));
    }
    if p.n_endmembers > p.n_bands {
        return Err(SynthError::Parameter(format!(
            "unmix: {} endmembers exceed {} bands",
            p.n_endmembers, p.n_bands
        )));
    }
    if !p.snr_db.is_finite() {
        return Err(SynthError::Parameter("unmix: snr_db must be finite".into()));
    }
    let mut rng = placement_stream(p.seed);
    let columns: Vec<DVector<f64>> = (0..p.n_endmembers).map(|_| endmember(p.n_bands, &mut rng)).collect();
    let endmembers = DMatrix::from_columns(&columns);

    let sites: Vec<(f64, f64)> =
        (0..p.n_regions).map(|_| (rng.random::<f64>() * p.height as f64, rng.random::<f64>() * p.width as f64)).collect();
    let fractions: Vec<DVector<f64>> = (0..p.n_regions).map(|_| simplex_point(p.n_endmembers, &mut rng)).collect();
    let abundances: Vec<DVector<f64>> = (0..p.height * p.width)
        .map(|k| {
            let (i, j) = ((k / p.width) as f64 + 0.5, (k % p.width) as f64 + 0.5);
            let nearest = (0..p.n_regions)
                .min_by(|&a, &b| {
                    let da = (sites[a].0 - i).powi(2) + (sites[a].1 - j).powi(2);
                    let db = (sites[b].0 - i).powi(2) + (sites[b].1 - j).powi(2);
                    da.total_cmp(&db)
                })
                .expect("at least one region");
            fractions[nearest].clone()
        })
        .collect();
    let clean: Vec<DVector<f64>> = abundances.iter().map(|w| &endmembers * w).collect();
    let power = clean.iter().map(|y| y.norm_squared()).sum::<f64>() / (clean.len() * p.n_bands) as f64;
    let noise_variance = power / 10f64.powf(p.snr_db / 10.0);

    Ok(UnmixEnv {
        params: p.clone(),
        endmembers,
        abundances,
        clean,
        noise_variance,
        neighbors: lattice_neighbors(p.height, p.width),
    })
}

impl UnmixEnv {
    pub fn n_pixels(&self) -> usize {
        self.clean.len()
    }

    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    /// One node per pixel, each its own cluster.
    pub fn network(&self) -> ClusteredNetwork {
        let edges: Vec<(usize, usize)> = self
            .neighbors
            .iter()
            .enumerate()
            .flat_map(|(k, ns)| ns.iter().filter(move |&&j| j > k).map(move |&j| (k, j)))
            .collect();
        let n = self.n_pixels();
        ClusteredNetwork::new(n, &edges, (0..n).map(|k| vec![k]).collect()).expect("lattice is connected")
    }

    /// Noisy pixels y = M w* + v.
    pub fn observe(&self, rng: &mut dyn RngCore) -> Vec<DVector<f64>> {
        let sd = self.noise_variance.sqrt();
        self.clean
            .iter()
            .map(|y| y.map(|v| v + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)))
            .collect()
    }

    /// ρ_kj = θ(y_k, y_j) / Σ_i θ(y_k, y_i) with θ the cosine similarity.
    pub fn similarity_weights(&self, y: &[DVector<f64>]) -> Vec<Vec<(usize, f64)>> {
        self.neighbors
            .iter()
            .enumerate()
            .map(|(k, ns)| {
                let theta: Vec<f64> = ns.iter().map(|&j| y[k].dot(&y[j]) / (y[k].norm() * y[j].norm())).collect();
                let total: f64 = theta.iter().sum();
                ns.iter().zip(&theta).map(|(&j, &t)| (j, t / total)).collect()
            })
            .collect()
    }

    /// Observations packaged for the projected diffusion step.
    pub fn data(&self, y: Vec<DVector<f64>>) -> UnmixData {
        let weights = self.similarity_weights(&y);
        UnmixData::new(self.endmembers.clone(), y, weights).expect("shapes are consistent by construction")
    }

    /// 10 log10(‖clean‖² / ‖y − clean‖²).
    pub fn measured_snr_db(&self, y: &[DVector<f64>]) -> f64 {
        let signal: f64 = self.clean.iter().map(|c| c.norm_squared()).sum();
        let noise: f64 = y.iter().zip(&self.clean).map(|(a, c)| (a - c).norm_squared()).sum();
        10.0 * (signal / noise).log10()
    }

    /// Abundance map of endmember `r` as `height` CSV lines of `width` values.
    pub fn abundance_csv(&self, r: usize) -> String {
        let mut out = String::new();
        for i in 0..self.params.height {
            let row: Vec<String> = (0..self.params.width)
                .map(|j| self.abundances[i * self.params.width + j][r].to_string())
                .collect();
            writeln!(out, "{}", row.join(",")).expect("writing to a String cannot fail");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::data_stream;

    fn small() -> UnmixParams {
        UnmixParams { height: 20, width: 20, n_endmembers: 5, n_bands: 64, snr_db: 20.0, n_regions: 8, seed: 4 }
    }

    #[test]
    fn abundances_on_simplex() {
        let env = unmix_env(&small()).unwrap();
        for w in &env.abundances {
            assert!(w.iter().all(|&v| v >= 0.0));
            assert!((w.sum() - 1.0).abs() < 1e-12);
        }
        assert!(env.endmembers.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn measured_snr_close_to_requested() {
        let env = unmix_env(&small()).unwrap();
        let y = env.observe(&mut data_stream(1, 0, 0));
        assert!((env.measured_snr_db(&y) - 20.0).abs() <= 0.2);
    }

    #[test]
    fn more_endmembers_than_bands_rejected() {
        let p = UnmixParams { n_endmembers: 10, n_bands: 8, ..small() };
        assert!(unmix_env(&p).is_err());
    }

    #[test]
    fn identical_neighbors_get_uniform_weights() {
        let env = unmix_env(&UnmixParams { height: 3, width: 3, ..small() }).unwrap();
        let y = vec![DVector::from_element(64, 0.5); 9];
        let w = env.similarity_weights(&y);
        assert_eq!(w[4].len(), 4);
        for &(_, rho) in &w[4] {
            assert!((rho - 0.25).abs() < 1e-15);
        }
        for &(_, rho) in &w[0] {
            assert!((rho - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn lattice_has_four_neighbors_inside() {
        let n = lattice_neighbors(3, 4);
        assert_eq!(n[5], vec![1, 4, 6, 9]);
        assert_eq!(n[0], vec![1, 4]);
    }

    #[test]
    fn csv_grid_shape() {
        let env = unmix_env(&UnmixParams { height: 2, width: 3, ..small() }).unwrap();
        let text = env.abundance_csv(0);
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| l.split(',').count() == 3));
    }
}
