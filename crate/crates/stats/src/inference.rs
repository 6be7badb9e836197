use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::describe::{mean, sd, variance};
use crate::{StatsError, TestResult};

pub const D_CI_METHOD: &str = "normal approximation, se(d) = sqrt(1/n + d^2/(2n))";
const Z975: f64 = 1.959_963_984_540_054;

/// Two-sided p-value for a t statistic.
pub fn t_p_value(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

/// |t| whose two-sided p-value is `p`.
pub fn t_for_p(p: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    dist.inverse_cdf(1.0 - p / 2.0)
}

/// Paired t-test on x - y. Cohen's d is mean / sd of the differences, and
/// t is computed from d so that t = d * sqrt(n) holds exactly.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, got: n });
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let s = sd(&diffs);
    if !(s > 0.0) {
        return Err(StatsError::ZeroVarianceDifferences);
    }
    let nf = n as f64;
    let d = mean(&diffs) / s;
    let t = d * nf.sqrt();
    let df = nf - 1.0;
    let se = (1.0 / nf + d * d / (2.0 * nf)).sqrt();
    Ok(TestResult {
        statistic: t,
        df,
        p_value: t_p_value(t, df),
        effect_size: d,
        ci95: (d - Z975 * se, d + Z975 * se),
        ci_method: D_CI_METHOD.into(),
    })
}

/// Pooled-variance two-sample t-test of a - b; d uses the pooled sd.
pub fn independent_t(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: na.min(nb) });
    }
    let (na, nb) = (na as f64, nb as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / df;
    if !(pooled > 0.0) {
        return Err(StatsError::ZeroPooledVariance);
    }
    let diff = mean(a) - mean(b);
    let t = diff / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let d = diff / pooled.sqrt();
    let se = ((na + nb) / (na * nb) + d * d / (2.0 * (na + nb))).sqrt();
    Ok(TestResult {
        statistic: t,
        df,
        p_value: t_p_value(t, df),
        effect_size: d,
        ci95: (d - Z975 * se, d + Z975 * se),
        ci_method: "normal approximation, se(d) = sqrt((na+nb)/(na*nb) + d^2/(2(na+nb)))".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_value_round_trip() {
        let t = t_for_p(0.808, 98.0);
        assert!((t_p_value(t, 98.0) - 0.808).abs() < 1e-9);
        assert!((t_p_value(1.984467, 98.0) - 0.05).abs() < 1e-5);
    }
}
