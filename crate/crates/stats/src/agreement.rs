use crate::StatsError;

/// Cohen's kappa from a square confusion matrix of counts
/// (rows: rater A, columns: rater B).
pub fn cohen_kappa(confusion: &[Vec<f64>]) -> Result<f64, StatsError> {
    let k = confusion.len();
    if k == 0 || confusion.iter().any(|r| r.len() != k || r.iter().any(|v| *v < 0.0)) {
        return Err(StatsError::BadConfusionMatrix);
    }
    let total: f64 = confusion.iter().flatten().sum();
    if total <= 0.0 {
        return Err(StatsError::BadConfusionMatrix);
    }
    let p_o = (0..k).map(|i| confusion[i][i]).sum::<f64>() / total;
    let p_e = (0..k)
        .map(|i| {
            let row: f64 = confusion[i].iter().sum();
            let col: f64 = confusion.iter().map(|r| r[i]).sum();
            row * col
        })
        .sum::<f64>()
        / (total * total);
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(StatsError::DegenerateMargins);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
