//! Ordinary least squares by Householder QR, and the one-covariate ANCOVA
//! built on it.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::describe::mean;
use crate::inference::t_p_value;
use crate::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub rss: f64,
    pub df_resid: f64,
}

impl OlsFit {
    pub fn t_value(&self, j: usize) -> f64 {
        self.coefficients[j] / self.std_errors[j]
    }

    pub fn p_value(&self, j: usize) -> f64 {
        t_p_value(self.t_value(j), self.df_resid)
    }
}

/// Least squares for `y ~ X`, where `x` holds one row per observation and
/// must include any intercept column.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, StatsError> {
    let n = x.len();
    if n != y.len() {
        return Err(StatsError::LengthMismatch(n, y.len()));
    }
    let p = x.first().map_or(0, Vec::len);
    if p == 0 || n <= p {
        return Err(StatsError::TooFewObservations { needed: p + 1, got: n });
    }
    // Column-major working copy; Householder reflections overwrite it with R.
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| x.iter().map(|r| r[j]).collect()).collect();
    let mut qty = y.to_vec();
    let scale = a.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    for j in 0..p {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * scale.max(1.0) {
            return Err(StatsError::RankDeficientDesign);
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|e| e * e).sum();
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        };
        for col in a.iter_mut().skip(j) {
            reflect(&mut col[j..]);
        }
        reflect(&mut qty[j..]);
    }
    let r = |i: usize, j: usize| a[j][i];
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = ((i + 1)..p).map(|k| r(i, k) * beta[k]).sum();
        beta[i] = (qty[i] - s) / r(i, i);
    }
    let rss: f64 = qty[p..].iter().map(|v| v * v).sum();
    let df_resid = (n - p) as f64;
    let sigma2 = rss / df_resid;
    // Rows of R^-1 give the coefficient covariance sigma^2 R^-1 R^-T.
    let mut rinv = vec![vec![0.0; p]; p];
    for j in 0..p {
        rinv[j][j] = 1.0 / r(j, j);
        for i in (0..j).rev() {
            let s: f64 = ((i + 1)..=j).map(|k| r(i, k) * rinv[k][j]).sum();
            rinv[i][j] = -s / r(i, i);
        }
    }
    let std_errors = (0..p).map(|i| (sigma2 * rinv[i].iter().map(|v| v * v).sum::<f64>()).sqrt()).collect();
    Ok(OlsFit { coefficients: beta, std_errors, rss, df_resid })
}

pub const ANCOVA_MODE: &str =
    "paper-faithful mode: the two conditions are treated as independent groups (one row per participant and condition)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncovaResult {
    /// `[intercept, condition, pre]`.
    pub coefficients: Vec<f64>,
    pub f: f64,
    pub df: (f64, f64),
    pub p_value: f64,
    pub partial_eta_sq: f64,
    pub ss_condition: f64,
    pub ss_error: f64,
    /// Predicted post at the grand-mean pre, `(condition = 1, condition = 0)`.
    pub adjusted_means: (f64, f64),
    pub mode: String,
}

/// `post = b0 + b1 * condition + b2 * pre`, condition coded 1/0.
pub fn ancova(post: &[f64], pre: &[f64], condition: &[bool]) -> Result<AncovaResult, StatsError> {
    if post.len() != pre.len() || post.len() != condition.len() {
        return Err(StatsError::LengthMismatch(post.len(), pre.len().min(condition.len())));
    }
    let treated = condition.iter().filter(|c| **c).count();
    let control = condition.len() - treated;
    if treated < 2 || control < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: treated.min(control) });
    }
    let rows: Vec<Vec<f64>> =
        pre.iter().zip(condition).map(|(p, c)| vec![1.0, if *c { 1.0 } else { 0.0 }, *p]).collect();
    let full = ols(&rows, post)?;
    let reduced_rows: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[2]]).collect();
    let reduced = ols(&reduced_rows, post)?;
    let ss_error = full.rss;
    let mut ss_condition = (reduced.rss - full.rss).max(0.0);
    let pbar = mean(post);
    let tss: f64 = post.iter().map(|v| (v - pbar).powi(2)).sum();
    // Below rounding noise the condition explains nothing; avoids 0/0 on exact fits.
    if ss_condition <= 1e-12 * tss {
        ss_condition = 0.0;
    }
    let df = (1.0, full.df_resid);
    let f = if ss_condition == 0.0 { 0.0 } else { ss_condition / (ss_error / df.1) };
    let p_value = FisherSnedecor::new(df.0, df.1).map(|d| 1.0 - d.cdf(f)).unwrap_or(f64::NAN);
    let b = &full.coefficients;
    let pre_bar = mean(pre);
    Ok(AncovaResult {
        f,
        df,
        p_value,
        partial_eta_sq: if ss_condition == 0.0 { 0.0 } else { ss_condition / (ss_condition + ss_error) },
        ss_condition,
        ss_error,
        adjusted_means: (b[0] + b[1] + b[2] * pre_bar, b[0] + b[2] * pre_bar),
        coefficients: full.coefficients,
        mode: ANCOVA_MODE.into(),
    })
}
