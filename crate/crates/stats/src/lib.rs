//! Statistics for two-condition crossover studies: agreement and
//! reliability coefficients, paired and independent t-tests, ANCOVA,
//! seeded bootstrap intervals, and a moment-matched synthetic study.
//!
//! Variances use the sample convention (divisor n - 1) throughout.

pub mod agreement;
pub mod bootstrap;
pub mod dataset;
pub mod describe;
pub mod inference;
pub mod linear;
pub mod reliability;
pub mod report;
pub mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::cohen_kappa;
pub use bootstrap::{bootstrap_ci, BootstrapConfig};
pub use dataset::{Condition, PriorKnowledge, Sequence, StudyDataset, StudyRow};
pub use inference::{independent_t, paired_t};
pub use linear::{ancova, ols, AncovaResult, OlsFit};
pub use reliability::cronbach_alpha;
pub use report::{analyze_study, emit_plot_data, StudyReport};
pub use synthetic::{generate_synthetic_study, StudyTargets};

pub const VARIANCE_CONVENTION: &str = "sample variance (divisor n - 1)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("confusion matrix must be square and non-empty with a positive total")]
    BadConfusionMatrix,
    #[error("chance agreement is 1; kappa is undefined")]
    DegenerateMargins,
    #[error("total score variance is zero")]
    ZeroTotalVariance,
    #[error("paired differences have zero variance")]
    ZeroVarianceDifferences,
    #[error("pooled variance is zero")]
    ZeroPooledVariance,
    #[error("design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("inputs have mismatched lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("bootstrap needs B >= 100, got {0}")]
    TooFewResamples(usize),
    #[error("bootstrap resample {index} stayed degenerate after {retries} redraws: {source}")]
    DegenerateResample { index: usize, retries: usize, source: Box<StatsError> },
    #[error("row {row}, field `{field}`: {reason}")]
    SchemaViolation { row: usize, field: String, reason: String },
    #[error("targets are infeasible: {0}")]
    InfeasibleTargets(String),
}

/// Outcome of a two-sided test. `effect_size` is Cohen's d (signed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub effect_size: f64,
    pub ci95: (f64, f64),
    pub ci_method: String,
}
