use nalgebra::DVector;

use super::AdaptError;

/// Euclidean projection onto {w : w ≥ 0, Σ w = 1} by sort-and-threshold.
pub fn project_simplex(v: &DVector<f64>) -> Result<DVector<f64>, AdaptError> {
    if v.is_empty() {
        return Err(AdaptError::EmptyVector);
    }
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    Ok(v.map(|x| (x - theta).max(0.0)))
}
