use crate::describe::variance;
use crate::StatsError;

/// Cronbach's alpha for an n x k matrix given as rows of item scores.
pub fn cronbach_alpha(rows: &[Vec<f64>]) -> Result<f64, StatsError> {
    let n = rows.len();
    if n < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: n });
    }
    let k = rows[0].len();
    if k < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: k });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != k) {
        return Err(StatsError::LengthMismatch(k, r.len()));
    }
    let item_var: f64 = (0..k).map(|j| variance(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).sum();
    let totals: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let total_var = variance(&totals);
    if total_var <= 0.0 || total_var.abs() < 1e-300 {
        return Err(StatsError::ZeroTotalVariance);
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var / total_var))
}
