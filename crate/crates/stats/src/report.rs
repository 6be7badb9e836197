use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_ci, BootstrapConfig};
use crate::dataset::{Condition, Sequence, StudyDataset, StudyRow};
use crate::describe::{box_summary, mean, sd, BoxSummary};
use crate::inference::{independent_t, paired_t};
use crate::linear::{ancova, ols, AncovaResult};
use crate::reliability::cronbach_alpha;
use crate::{StatsError, TestResult, VARIANCE_CONVENTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub measure: String,
    pub animation_mean: f64,
    pub animation_sd: f64,
    pub slides_mean: f64,
    pub slides_sd: f64,
    /// Animation minus slides; d is signed.
    pub test: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub pre_mean: f64,
    pub post_mean: f64,
    pub gain_mean: f64,
    pub gain_sd: f64,
    pub imi: BoxSummary,
    pub tlx: BoxSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Animation advantage (per-participant gain difference) compared across
/// two groups; `test` is first group minus second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub groups: [GroupSummary; 2],
    pub test: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub model: String,
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub scale: String,
    pub alpha: f64,
    pub ci95: (f64, f64),
    pub ci_method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub participants: usize,
    pub variance_convention: String,
    pub conditions: Vec<ConditionSummary>,
    pub paired: Vec<PairedRow>,
    pub ancova: AncovaResult,
    pub subgroup: GroupComparison,
    pub order_effect: GroupComparison,
    pub interactions: Vec<InteractionTerm>,
    pub reliability: Vec<ReliabilityRow>,
    pub notes: Vec<String>,
}

impl StudyReport {
    pub fn paired_row(&self, measure: &str) -> Option<&PairedRow> {
        self.paired.iter().find(|r| r.measure == measure)
    }

    pub fn reliability_row(&self, scale: &str) -> Option<&ReliabilityRow> {
        self.reliability.iter().find(|r| r.scale == scale)
    }
}

const MEASURES: [(&str, fn(&StudyRow) -> f64); 5] = [
    ("gain", |r| r.gain),
    ("imi", StudyRow::imi),
    ("tlx", StudyRow::tlx),
    ("satisfaction", |r| r.satisfaction),
    ("minutes", |r| r.minutes),
];

fn group(name: &str, x: &[f64]) -> GroupSummary {
    GroupSummary { group: name.into(), n: x.len(), mean: mean(x), sd: sd(x) }
}

fn compare(names: [&str; 2], a: &[f64], b: &[f64]) -> Result<GroupComparison, StatsError> {
    Ok(GroupComparison { groups: [group(names[0], a), group(names[1], b)], test: independent_t(a, b)? })
}

/// Alpha over both rows of each selected participant.
fn alpha_for(pairs: &[(&StudyRow, &StudyRow)], idx: &[usize], items: fn(&StudyRow) -> Vec<f64>) -> Result<f64, StatsError> {
    let rows: Vec<Vec<f64>> = idx.iter().flat_map(|&i| [items(pairs[i].0), items(pairs[i].1)]).collect();
    cronbach_alpha(&rows)
}

/// Interaction coefficient of `post ~ 1 + cond + g + cond:g + pre`.
fn interaction(rows: &[StudyRow], model: &str, g: fn(&StudyRow) -> f64) -> Result<InteractionTerm, StatsError> {
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let c = if r.condition == Condition::Animation { 1.0 } else { 0.0 };
            vec![1.0, c, g(r), c * g(r), r.pre]
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.post).collect();
    let fit = ols(&x, &y)?;
    Ok(InteractionTerm {
        model: model.into(),
        term: format!("condition x {model}"),
        estimate: fit.coefficients[3],
        std_error: fit.std_errors[3],
        t: fit.t_value(3),
        df: fit.df_resid,
        p_value: fit.p_value(3),
    })
}

pub fn analyze_study(ds: &StudyDataset, boot: BootstrapConfig) -> Result<StudyReport, StatsError> {
    ds.validate()?;
    let pairs = ds.pairs();
    let n = pairs.len();

    let mut paired = Vec::new();
    for (name, f) in MEASURES {
        let (a, s) = ds.paired(f);
        paired.push(PairedRow {
            measure: name.into(),
            animation_mean: mean(&a),
            animation_sd: sd(&a),
            slides_mean: mean(&s),
            slides_sd: sd(&s),
            test: paired_t(&a, &s)?,
        });
    }

    let conditions = [Condition::Animation, Condition::Slides]
        .into_iter()
        .map(|c| {
            let rows: Vec<&StudyRow> = ds.rows.iter().filter(|r| r.condition == c).collect();
            let col = |f: fn(&StudyRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
            let gains = col(|r| r.gain);
            ConditionSummary {
                condition: c,
                pre_mean: mean(&col(|r| r.pre)),
                post_mean: mean(&col(|r| r.post)),
                gain_mean: mean(&gains),
                gain_sd: sd(&gains),
                imi: box_summary(&col(StudyRow::imi)),
                tlx: box_summary(&col(StudyRow::tlx)),
            }
        })
        .collect();

    let post: Vec<f64> = ds.rows.iter().map(|r| r.post).collect();
    let pre: Vec<f64> = ds.rows.iter().map(|r| r.pre).collect();
    let cond: Vec<bool> = ds.rows.iter().map(|r| r.condition == Condition::Animation).collect();
    let ancova = ancova(&post, &pre, &cond)?;

    let advantage = |keep: &dyn Fn(&StudyRow) -> bool| -> Vec<f64> {
        pairs.iter().filter(|(a, _)| keep(a)).map(|(a, s)| a.gain - s.gain).collect()
    };
    let subgroup = compare(
        ["low prior knowledge", "high prior knowledge"],
        &advantage(&|r| r.prior_knowledge.is_low()),
        &advantage(&|r| !r.prior_knowledge.is_low()),
    )?;
    let order_effect = compare(
        ["animation first", "slides first"],
        &advantage(&|r| r.sequence == Sequence::AnimationFirst),
        &advantage(&|r| r.sequence == Sequence::SlidesFirst),
    )?;

    let interactions = vec![
        interaction(&ds.rows, "low prior knowledge", |r| if r.prior_knowledge.is_low() { 1.0 } else { 0.0 })?,
        interaction(&ds.rows, "second period", |r| if r.period == 2 { 1.0 } else { 0.0 })?,
    ];

    let all: Vec<usize> = (0..n).collect();
    let scales: [(&str, fn(&StudyRow) -> Vec<f64>); 2] =
        [("imi", |r| r.imi_items.to_vec()), ("tlx", |r| r.tlx_items.to_vec())];
    let mut reliability = Vec::new();
    for (name, items) in scales {
        reliability.push(ReliabilityRow {
            scale: name.into(),
            alpha: alpha_for(&pairs, &all, items)?,
            ci95: bootstrap_ci(n, |idx| alpha_for(&pairs, idx, items), boot)?,
            ci_method: format!(
                "percentile bootstrap, B = {}, seed {}, participants resampled with both rows",
                boot.resamples, boot.seed
            ),
        });
    }

    Ok(StudyReport {
        participants: n,
        variance_convention: VARIANCE_CONVENTION.into(),
        conditions,
        paired,
        ancova,
        subgroup,
        order_effect,
        interactions,
        reliability,
        notes: vec![
            "Cohen's d is signed (animation minus slides); published tables list some magnitudes only.".into(),
            "Mixed models are replaced by OLS with condition x subgroup and condition x period interaction terms."
                .into(),
            "Alpha is computed over both conditions' rows together.".into(),
        ],
    })
}

fn ci(c: (f64, f64)) -> String {
    format!("[{:.2}, {:.2}]", c.0, c.1)
}

pub fn render_text(r: &StudyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Crossover study, N = {} participants", r.participants);
    let _ = writeln!(s, "Variances: {}\n", r.variance_convention);
    let _ = writeln!(s, "Paired comparisons (animation - slides)");
    let _ = writeln!(s, "{:<14}{:>16}{:>16}{:>9}{:>6}{:>10}{:>8}  d 95% CI", "measure", "animation", "slides", "t", "df", "p", "d");
    for p in &r.paired {
        let _ = writeln!(
            s,
            "{:<14}{:>9.2} ± {:<4.2}{:>9.2} ± {:<4.2}{:>9.2}{:>6}{:>10.2e}{:>8.2}  {}",
            p.measure,
            p.animation_mean,
            p.animation_sd,
            p.slides_mean,
            p.slides_sd,
            p.test.statistic,
            p.test.df,
            p.test.p_value,
            p.test.effect_size,
            ci(p.test.ci95)
        );
    }
    let a = &r.ancova;
    let _ = writeln!(
        s,
        "\nANCOVA (post ~ condition + pre): F({}, {}) = {:.2}, p = {:.2e}, partial eta^2 = {:.3}",
        a.df.0, a.df.1, a.f, a.p_value, a.partial_eta_sq
    );
    let _ = writeln!(s, "  adjusted means: animation {:.2}, slides {:.2}", a.adjusted_means.0, a.adjusted_means.1);
    let _ = writeln!(s, "  {}", a.mode);
    for (title, g) in [("Subgroup (animation advantage)", &r.subgroup), ("Order effect (animation advantage)", &r.order_effect)] {
        let _ = writeln!(s, "\n{title}");
        for x in &g.groups {
            let _ = writeln!(s, "  {:<22} n = {:>3}  mean {:.2}  sd {:.2}", x.group, x.n, x.mean, x.sd);
        }
        let _ = writeln!(s, "  t({}) = {:.2}, p = {:.3}", g.test.df, g.test.statistic, g.test.p_value);
    }
    let _ = writeln!(s, "\nInteraction terms");
    for i in &r.interactions {
        let _ = writeln!(s, "  {:<34} b = {:>6.2}  se {:.2}  t({}) = {:.2}, p = {:.3}", i.term, i.estimate, i.std_error, i.df, i.t, i.p_value);
    }
    let _ = writeln!(s, "\nReliability");
    for x in &r.reliability {
        let _ = writeln!(s, "  {:<4} alpha = {:.3}  95% CI {}  ({})", x.scale, x.alpha, ci(x.ci95), x.ci_method);
    }
    let _ = writeln!(s, "\nNotes");
    for n in &r.notes {
        let _ = writeln!(s, "  - {n}");
    }
    s
}

fn box_csv(r: &StudyReport, pick: fn(&ConditionSummary) -> &BoxSummary) -> String {
    let mut s = String::from("condition,min,q1,median,q3,max,mean\n");
    for c in &r.conditions {
        let b = pick(c);
        let name = if c.condition == Condition::Animation { "animation" } else { "slides" };
        let _ = writeln!(s, "{name},{},{},{},{},{},{}", b.min, b.q1, b.median, b.q3, b.max, b.mean);
    }
    s
}

/// `(file name, CSV text)` for each figure series.
pub fn emit_plot_data(r: &StudyReport) -> Vec<(String, String)> {
    let mut learning = String::from("condition,pre_mean,post_mean,gain_mean,gain_sd\n");
    for c in &r.conditions {
        let name = if c.condition == Condition::Animation { "animation" } else { "slides" };
        let _ = writeln!(learning, "{name},{},{},{},{}", c.pre_mean, c.post_mean, c.gain_mean, c.gain_sd);
    }
    let mut subgroup = String::from("group,n,mean_advantage,sd\n");
    for g in &r.subgroup.groups {
        let _ = writeln!(subgroup, "{},{},{},{}", g.group, g.n, g.mean, g.sd);
    }
    vec![
        ("learning_performance.csv".into(), learning),
        ("engagement_box.csv".into(), box_csv(r, |c| &c.imi)),
        ("workload_box.csv".into(), box_csv(r, |c| &c.tlx)),
        ("subgroup_advantage.csv".into(), subgroup),
    ]
}
