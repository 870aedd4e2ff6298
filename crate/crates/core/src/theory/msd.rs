use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{db, TheoryError, TheoryModel};

/// Theoretical network MSD learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdCurve {
    /// ζ(n) for n = 0..T−1.
    pub zeta: Vec<f64>,
    /// E v(n) for n = 0..T−1.
    pub mean_v: Vec<DVector<f64>>,
    /// Cross-term history Γ after the last step, kept as an LN×LN matrix whose
    /// trace against the identity weighting gives the bias coupling.
    pub gamma: DMatrix<f64>,
}

impl MsdCurve {
    /// `iteration,msd_linear,msd_db` rows.
    pub fn to_csv(&self) -> String {
        curve_csv(&self.zeta)
    }
}

pub(crate) fn curve_csv(values: &[f64]) -> String {
    let mut out = String::from("iteration,msd_linear,msd_db\n");
    for (n, v) in values.iter().enumerate() {
        writeln!(out, "{n},{v:e},{}", db(*v)).expect("writing to a String cannot fail");
    }
    out
}

impl TheoryModel {
    /// Learning curve from initial error `v0`, T points.
    ///
    /// With S_n = (Bᵀ)ⁿBⁿ and c_n = B E v(n):
    /// Nζ(n+1) = Nζ(n) + μ² tr(GS_n) + v0ᵀ(S_{n+1} − S_n)v0 + μ²η² rᵀS_n r − 2μη(rᵀc_n + tr Γ_n),
    /// Γ_{n+1} = BΓ_nBᵀ + Bc_n rᵀBᵀ − c_n rᵀ, Γ_0 = 0.
    pub fn transient_msd(&self, v0: &DVector<f64>, t: usize) -> Result<MsdCurve, TheoryError> {
        let ln = self.b().nrows();
        if v0.len() != ln {
            return Err(TheoryError::Dimension(format!("v0 has length {}, expected {ln}", v0.len())));
        }
        let n = self.n_nodes() as f64;
        let (mu, eta) = (self.mu(), self.eta());
        let b = self.b();
        let bt = b.transpose();
        let r = self.r();
        let coupled = eta != 0.0 && r.amax() != 0.0;

        let mean_v = self.mean_recursion(v0, t);
        let mut zeta = Vec::with_capacity(t);
        let mut s = DMatrix::identity(ln, ln);
        let mut gamma = DMatrix::zeros(ln, ln);
        let mut current = v0.norm_squared() / n;
        let mut quad = current * n;
        for step in 0..t {
            zeta.push(current);
            if step + 1 == t {
                break;
            }
            let s_next = &bt * &s * b;
            let quad_next = v0.dot(&(&s_next * v0));
            let mut inc = mu * mu * (self.g() * &s).trace() + (quad_next - quad);
            if coupled {
                let c = b * &mean_v[step];
                inc += mu * mu * eta * eta * r.dot(&(&s * r)) - 2.0 * mu * eta * (r.dot(&c) + gamma.trace());
                let crt = &c * r.transpose();
                gamma = b * &gamma * &bt + b * &crt * &bt - crt;
            }
            current += inc / n;
            s = s_next;
            quad = quad_next;
        }
        Ok(MsdCurve { zeta, mean_v, gamma })
    }
}
