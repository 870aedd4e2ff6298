use nalgebra::{DMatrix, DVector};

use super::{kron, spectral_radius, vec, TheoryError};
use crate::adapt::AdaptConfig;
use crate::synth::NodeEnvironment;
use crate::topology::{ClusteredNetwork, CombinerSet};

/// Largest allowed (LN)², the entry count of the weighted-variance operator.
pub const DEFAULT_SIZE_CAP: usize = 1 << 22;

/// Tolerance of the steady-state Lyapunov solve.
const LYAPUNOV_TOL: f64 = 1e-12;
const LYAPUNOV_MAX_DOUBLINGS: usize = 200;

/// Assembled operators for one (network, combiners, environment, μ, η).
#[derive(Debug, Clone)]
pub struct TheoryModel {
    n_nodes: usize,
    dim: usize,
    mu: f64,
    eta: f64,
    b: DMatrix<f64>,
    g: DMatrix<f64>,
    r: DVector<f64>,
    q: DMatrix<f64>,
    h_r: DMatrix<f64>,
    r_blocks: Vec<DMatrix<f64>>,
    w_star: DVector<f64>,
}

impl TheoryModel {
    /// Builds B = A_Iᵀ[I − μ(H_R + ηQ)], G = A_IᵀC_Iᵀ diag(σ²_{z,k} R_{x,k}) C_I A_I,
    /// r = A_IᵀQw* and Q = (diag(P1) − P) ⊗ I_L.
    ///
    /// When every row of P sums to one, Q = I − P ⊗ I_L. Rows forced to zero
    /// contribute nothing, matching the recursion, where such nodes feel no
    /// regularization pull.
    pub fn assemble(
        network: &ClusteredNetwork,
        combiners: &CombinerSet,
        env: &NodeEnvironment,
        config: &AdaptConfig,
        size_cap: usize,
    ) -> Result<Self, TheoryError> {
        let n = network.n_nodes();
        let l = env.dim();
        let ln = n * l;
        let required = ln.saturating_mul(ln);
        if required > size_cap {
            return Err(TheoryError::SizeCap { required, cap: size_cap });
        }
        if env.n_nodes() != n {
            return Err(TheoryError::Dimension(format!("environment has {} nodes, network has {n}", env.n_nodes())));
        }
        for (name, m) in [("A", &combiners.a), ("C", &combiners.c), ("P", &combiners.p)] {
            if m.shape() != (n, n) {
                return Err(TheoryError::Dimension(format!("{name} is {:?}, expected {n}x{n}", m.shape())));
            }
        }

        let eye_l = DMatrix::identity(l, l);
        let a_i = kron(&combiners.a, &eye_l);
        let c_i = kron(&combiners.c, &eye_l);

        let r_blocks: Vec<DMatrix<f64>> = (0..n)
            .map(|k| {
                let mut rk = DMatrix::zeros(l, l);
                for ell in 0..n {
                    let c = combiners.c[(ell, k)];
                    if c != 0.0 {
                        rk += &env.r_x()[ell] * c;
                    }
                }
                rk
            })
            .collect();
        let mut h_r = DMatrix::zeros(ln, ln);
        let mut noise = DMatrix::zeros(ln, ln);
        for k in 0..n {
            h_r.view_mut((k * l, k * l), (l, l)).copy_from(&r_blocks[k]);
            noise
                .view_mut((k * l, k * l), (l, l))
                .copy_from(&(&env.r_x()[k] * env.sigma2_z()[k]));
        }

        let row_sums = DMatrix::from_diagonal(&DVector::from_fn(n, |k, _| combiners.p.row(k).sum()));
        let q = kron(&(row_sums - &combiners.p), &eye_l);

        let (mu, eta) = (config.mu, config.eta);
        let b = a_i.transpose() * (DMatrix::identity(ln, ln) - (&h_r + &q * eta) * mu);
        let ca = &c_i * &a_i;
        let g = ca.transpose() * noise * ca;
        let w_star = env.stacked_w_star();
        let r = a_i.transpose() * (&q * &w_star);

        Ok(Self { n_nodes: n, dim: l, mu, eta, b, g, r, q, h_r, r_blocks, w_star })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn h_r(&self) -> &DMatrix<f64> {
        &self.h_r
    }

    /// R_k = Σ_ℓ c_{ℓk} R_{x,ℓ}.
    pub fn r_blocks(&self) -> &[DMatrix<f64>] {
        &self.r_blocks
    }

    pub fn w_star(&self) -> &DVector<f64> {
        &self.w_star
    }

    /// Initial error v(0) = −w* for w(0) = 0.
    pub fn zero_start_error(&self) -> DVector<f64> {
        -&self.w_star
    }

    /// Kσ = vec(BᵀΣB) with Σ = unvec(σ), without forming K.
    pub fn k_apply(&self, sigma: &DMatrix<f64>) -> DMatrix<f64> {
        self.b.transpose() * sigma * &self.b
    }

    /// K = Bᵀ ⊗ Bᵀ as a dense matrix. Only for small models.
    pub fn k_dense(&self) -> DMatrix<f64> {
        let bt = self.b.transpose();
        kron(&bt, &bt)
    }

    /// Right endpoint of 0 < μ < 2/(max_k λ_max(R_k) + 2η).
    pub fn step_size_bound(&self) -> f64 {
        let lambda = self
            .r_blocks
            .iter()
            .map(|rk| rk.symmetric_eigenvalues().max())
            .fold(f64::NEG_INFINITY, f64::max);
        2.0 / (lambda + 2.0 * self.eta)
    }

    pub fn spectral_radius_b(&self) -> f64 {
        spectral_radius(&self.b)
    }

    /// ρ(K) = ρ(B)² for K = Bᵀ ⊗ Bᵀ.
    pub fn spectral_radius_k(&self) -> f64 {
        self.spectral_radius_b().powi(2)
    }

    fn require_stable(&self) -> Result<(), TheoryError> {
        let radius = self.spectral_radius_b();
        if radius >= 1.0 || !radius.is_finite() {
            return Err(TheoryError::Unstable { radius });
        }
        Ok(())
    }

    /// E v(n) for n = 0..T−1 starting from v0.
    pub fn mean_recursion(&self, v0: &DVector<f64>, t: usize) -> Vec<DVector<f64>> {
        let forcing = &self.r * (self.mu * self.eta);
        let mut out = Vec::with_capacity(t);
        let mut v = v0.clone();
        for _ in 0..t {
            let next = &self.b * &v - &forcing;
            out.push(std::mem::replace(&mut v, next));
        }
        out
    }

    /// lim E v(n) = μη (B − I)⁻¹ r.
    pub fn asymptotic_bias(&self) -> Result<DVector<f64>, TheoryError> {
        self.require_stable()?;
        let ln = self.b.nrows();
        let lhs = &self.b - DMatrix::identity(ln, ln);
        lhs.lu().solve(&(&self.r * (self.mu * self.eta))).ok_or(TheoryError::Singular)
    }

    /// Solves Σ − BᵀΣB = I/N by doubling: X ← X + MᵀXM, M ← M².
    pub(crate) fn steady_weight(&self) -> Result<DMatrix<f64>, TheoryError> {
        self.require_stable()?;
        let ln = self.b.nrows();
        let mut x = DMatrix::identity(ln, ln) / self.n_nodes as f64;
        let mut m = self.b.clone();
        for _ in 0..LYAPUNOV_MAX_DOUBLINGS {
            let update = m.transpose() * &x * &m;
            let size = update.amax();
            x += &update;
            if size <= LYAPUNOV_TOL * x.amax() {
                let residual = (&x - self.k_apply(&x) - DMatrix::identity(ln, ln) / self.n_nodes as f64).amax();
                if residual > 1e-9 * x.amax() {
                    return Err(TheoryError::NotConverged { residual });
                }
                return Ok(x);
            }
            m = &m * &m;
        }
        Err(TheoryError::NotConverged { residual: f64::NAN })
    }

    /// ζ* = μ² tr(GΣ) + μ²η² rᵀΣr − 2μη rᵀΣB E v(∞), with Σ − BᵀΣB = I/N.
    pub fn steady_state_msd(&self) -> Result<f64, TheoryError> {
        let sigma = self.steady_weight()?;
        let bias = self.asymptotic_bias()?;
        let (mu, eta) = (self.mu, self.eta);
        let noise = mu * mu * (&self.g * &sigma).trace();
        let sr = &sigma * &self.r;
        let drift = mu * mu * eta * eta * self.r.dot(&sr) - 2.0 * mu * eta * sr.dot(&(&self.b * bias));
        Ok(noise + drift)
    }

    /// Same as [`TheoryModel::steady_state_msd`] but through a dense solve of
    /// (I − K)σ = vec(I)/N. Only for small models.
    pub fn steady_state_msd_dense(&self) -> Result<f64, TheoryError> {
        self.require_stable()?;
        let ln = self.b.nrows();
        let k = self.k_dense();
        let n2 = ln * ln;
        let rhs = vec(&(DMatrix::identity(ln, ln) / self.n_nodes as f64));
        let sigma = (DMatrix::identity(n2, n2) - k).lu().solve(&rhs).ok_or(TheoryError::Singular)?;
        let sigma = DMatrix::from_column_slice(ln, ln, sigma.as_slice());
        let bias = self.asymptotic_bias()?;
        let (mu, eta) = (self.mu, self.eta);
        let sr = &sigma * &self.r;
        Ok(mu * mu * vec(&self.g.transpose()).dot(&vec(&sigma)) + mu * mu * eta * eta * self.r.dot(&sr)
            - 2.0 * mu * eta * sr.dot(&(&self.b * bias)))
    }
}
