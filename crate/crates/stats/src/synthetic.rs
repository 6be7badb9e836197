//! Seeded synthetic crossover study whose summary statistics are set
//! exactly rather than approximately.
//!
//! Every target moment is hit by affine standardization of normal draws
//! that have been orthogonalized against the vectors already fixed, so
//! sample means, sample sds and the paired-difference sd come out exact up
//! to rounding.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Condition, PriorKnowledge, Sequence, StudyDataset, StudyRow, IMI_ITEMS, TLX_ITEMS};
use crate::inference::t_for_p;
use crate::reliability::cronbach_alpha;
use crate::StatsError;

const MAX_REDRAWS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

const fn m(mean: f64, sd: f64) -> Moments {
    Moments { mean, sd }
}

/// Per-condition moments plus the paired effect size d (signed,
/// animation minus slides). The difference sd is `|delta / d|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTarget {
    pub animation: Moments,
    pub slides: Moments,
    pub d: f64,
}

impl PairedTarget {
    pub fn delta(&self) -> f64 {
        self.animation.mean - self.slides.mean
    }

    pub fn diff_sd(&self) -> f64 {
        (self.delta() / self.d).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTargets {
    pub participants: usize,
    pub pre: [Moments; 2],
    pub post: [Moments; 2],
    pub gain: PairedTarget,
    pub imi: PairedTarget,
    pub imi_alpha: f64,
    pub tlx: PairedTarget,
    pub tlx_alpha: f64,
    pub satisfaction: PairedTarget,
    pub minutes: PairedTarget,
    /// Counts for none, basic, intermediate, advanced.
    pub prior_knowledge: [usize; 4],
    /// Pooled two-sample t of the animation advantage, low minus high.
    pub subgroup_t: f64,
    /// Two-sided p of the animation-first vs slides-first comparison.
    pub order_p: f64,
    pub topics: Vec<String>,
}

impl Default for StudyTargets {
    /// Calibrated to the published descriptive and inferential tables.
    fn default() -> Self {
        Self {
            participants: 100,
            pre: [m(60.51, 9.54), m(59.47, 9.03)],
            post: [m(74.42, 9.56), m(69.05, 9.38)],
            gain: PairedTarget { animation: m(13.91, 4.90), slides: m(9.58, 5.51), d: 0.67 },
            imi: PairedTarget { animation: m(5.43, 0.44), slides: m(4.89, 0.42), d: 0.94 },
            imi_alpha: 0.82,
            tlx: PairedTarget { animation: m(9.99, 1.56), slides: m(10.73, 1.21), d: -0.41 },
            tlx_alpha: 0.79,
            satisfaction: PairedTarget { animation: m(5.63, 0.41), slides: m(4.79, 0.47), d: 1.64 },
            minutes: PairedTarget { animation: m(11.25, 1.18), slides: m(13.07, 1.31), d: -0.86 },
            prior_knowledge: [6, 37, 42, 15],
            subgroup_t: -2.11,
            order_p: 0.808,
            topics: ["Linear Transformations", "Linear Systems", "Eigenvalues and Eigenvectors", "Thermodynamics"]
                .map(String::from)
                .to_vec(),
        }
    }
}

fn infeasible(msg: impl Into<String>) -> StatsError {
    StatsError::InfeasibleTargets(msg.into())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the mean and the components along `basis` (each already
/// centered and mutually orthogonal), then scales to unit Euclidean norm.
fn orthonormalize(mut v: Vec<f64>, basis: &[&[f64]]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    for b in basis {
        let k = dot(&v, b) / dot(b, b);
        v.iter_mut().zip(b.iter()).for_each(|(x, y)| *x -= k * y);
    }
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A fresh unit-norm centered direction orthogonal to `basis`.
fn fresh(rng: &mut ChaCha8Rng, n: usize, basis: &[&[f64]]) -> Vec<f64> {
    orthonormalize(normals(rng, n), basis)
}

/// `mean + sd * sqrt(n-1) * unit`: sample mean and sd exactly as given.
fn affine(unit: &[f64], mo: Moments) -> Vec<f64> {
    let k = mo.sd * ((unit.len() - 1) as f64).sqrt();
    unit.iter().map(|u| mo.mean + k * u).collect()
}

/// Unit direction with correlation `rho` to the unit direction `z`.
fn correlated(rng: &mut ChaCha8Rng, z: &[f64], rho: f64, basis: &[&[f64]]) -> Vec<f64> {
    let mut b: Vec<&[f64]> = basis.to_vec();
    b.push(z);
    let w = fresh(rng, z.len(), &b);
    let s = (1.0 - rho * rho).sqrt();
    z.iter().zip(&w).map(|(a, c)| rho * a + s * c).collect()
}

/// Animation and slides vectors with exact moments and exact difference sd,
/// the difference pointing along `diff_dir` (unit norm, centered).
fn paired_vectors(
    rng: &mut ChaCha8Rng,
    t: &PairedTarget,
    diff_dir: &[f64],
    name: &str,
) -> Result<(Vec<f64>, Vec<f64>), StatsError> {
    let sd_d = t.diff_sd();
    if !(sd_d > 0.0 && sd_d.is_finite()) {
        return Err(infeasible(format!("{name}: d = {} implies a non-positive difference sd", t.d)));
    }
    let (sa, ss) = (t.animation.sd, t.slides.sd);
    // var(A) = var(S) + var(D) + 2 cov(S, D)
    let rho = (sa * sa - ss * ss - sd_d * sd_d) / (2.0 * ss * sd_d);
    if !(-1.0..=1.0).contains(&rho) {
        return Err(infeasible(format!("{name}: correlation {rho:.3} between slides and difference")));
    }
    let slides_dir = correlated(rng, diff_dir, rho, &[]);
    let slides = affine(&slides_dir, t.slides);
    let diff = affine(diff_dir, Moments { mean: t.delta(), sd: sd_d });
    let animation = slides.iter().zip(&diff).map(|(s, d)| s + d).collect();
    Ok((animation, slides))
}

/// Pre scores correlated with gains so that pre + gain has the post sd.
fn pre_for(rng: &mut ChaCha8Rng, gain: &[f64], pre: Moments, post: Moments, name: &str) -> Result<Vec<f64>, StatsError> {
    let g = orthonormalize(gain.to_vec(), &[]);
    let sg = crate::describe::sd(gain);
    let rho = (post.sd * post.sd - pre.sd * pre.sd - sg * sg) / (2.0 * pre.sd * sg);
    if !(-1.0..=1.0).contains(&rho) {
        return Err(infeasible(format!("{name}: pre/gain correlation {rho:.3}")));
    }
    Ok(affine(&correlated(rng, &g, rho, &[]), pre))
}

/// Items around `scores` whose row means equal the scores, with noise
/// scale tuned by bisection so Cronbach's alpha over all rows hits
/// `alpha`. Rows whose noise would leave `[lo, hi]` have it shrunk.
fn items_for(
    rng: &mut ChaCha8Rng,
    scores: &[f64],
    k: usize,
    (lo, hi): (f64, f64),
    alpha: f64,
    name: &str,
) -> Result<Vec<Vec<f64>>, StatsError> {
    let noise: Vec<Vec<f64>> = scores
        .iter()
        .map(|_| {
            let mut e = normals(rng, k);
            let m = e.iter().sum::<f64>() / k as f64;
            e.iter_mut().for_each(|x| *x -= m);
            e
        })
        .collect();
    let build = |lambda: f64| -> Vec<Vec<f64>> {
        scores
            .iter()
            .zip(&noise)
            .map(|(s, e)| {
                let mut f = lambda;
                for x in e {
                    let room = if *x > 0.0 { hi - s } else { s - lo };
                    if x.abs() * f > room {
                        f = room / x.abs();
                    }
                }
                e.iter().map(|x| s + f * x).collect()
            })
            .collect()
    };
    let alpha_at = |lambda: f64| cronbach_alpha(&build(lambda));
    let (mut a, mut b) = (0.0, 1.0);
    while alpha_at(b)? > alpha {
        b *= 2.0;
        if b > 1e4 {
            return Err(infeasible(format!("{name}: alpha {alpha} unreachable within the scale range")));
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if alpha_at(mid)? > alpha {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(build(0.5 * (a + b)))
}

fn indicator(n: usize, ones: &[bool]) -> Vec<f64> {
    (0..n).map(|i| if ones[i] { 1.0 } else { 0.0 }).collect()
}

fn group_mean_diff(v: &[f64], g: &[bool]) -> f64 {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
    for (x, in1) in v.iter().zip(g) {
        if *in1 {
            s1 += x;
            n1 += 1.0;
        } else {
            s0 += x;
            n0 += 1.0;
        }
    }
    s1 / n1 - s0 / n0
}

/// Unit direction for the animation advantage: a between-subgroup part
/// fixed by the subgroup t, a sequence part fixed by the order-effect p,
/// and fresh noise for the remainder.
fn advantage_direction(
    rng: &mut ChaCha8Rng,
    low: &[bool],
    anim_first: &[bool],
    t_sub: f64,
    t_seq: f64,
) -> Result<Vec<f64>, StatsError> {
    let n = low.len();
    let nf = n as f64;
    let df = nf - 2.0;
    // Work with total sum of squares 1; the caller rescales.
    let u = orthonormalize(indicator(n, low), &[]);
    let v = orthonormalize(indicator(n, anim_first), &[&u]);
    let e = fresh(rng, n, &[&u, &v]);
    let total = 1.0;
    let a = t_sub.signum() * (t_sub * t_sub * total / (df + t_sub * t_sub)).sqrt();
    let n1 = anim_first.iter().filter(|f| **f).count() as f64;
    let c = n1 * (nf - n1) / nf;
    let m_seq = t_seq.signum() * (t_seq * t_seq * total / (c * (df + t_seq * t_seq))).sqrt();
    let b = (m_seq - a * group_mean_diff(&u, anim_first)) / group_mean_diff(&v, anim_first);
    let rest = total - a * a - b * b;
    if rest < 0.0 {
        return Err(infeasible("subgroup and order targets leave no residual variance"));
    }
    let r = rest.sqrt();
    Ok((0..n).map(|i| a * u[i] + b * v[i] + r * e[i]).collect())
}

pub fn generate_synthetic_study(targets: &StudyTargets, seed: u64) -> Result<StudyDataset, StatsError> {
    let n = targets.participants;
    if n < 8 {
        return Err(infeasible("need at least 8 participants"));
    }
    if targets.prior_knowledge.iter().sum::<usize>() != n {
        return Err(infeasible("prior-knowledge counts must sum to the participant count"));
    }
    if targets.topics.len() < 2 {
        return Err(infeasible("need at least two topics"));
    }
    for (c, name) in [(0, "animation"), (1, "slides")] {
        let g = if c == 0 { targets.gain.animation.mean } else { targets.gain.slides.mean };
        if (targets.pre[c].mean + g - targets.post[c].mean).abs() > 1e-9 {
            return Err(infeasible(format!("{name}: post mean must equal pre mean plus gain mean")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..MAX_REDRAWS {
        let ds = draw(targets, &mut rng)?;
        match ds.validate() {
            Ok(()) => return Ok(ds),
            Err(e) => last = Some(e),
        }
    }
    Err(infeasible(format!("no in-range draw after {MAX_REDRAWS} attempts: {}", last.expect("attempted"))))
}

fn draw(t: &StudyTargets, rng: &mut ChaCha8Rng) -> Result<StudyDataset, StatsError> {
    let n = t.participants;
    let levels = [PriorKnowledge::None, PriorKnowledge::Basic, PriorKnowledge::Intermediate, PriorKnowledge::Advanced];
    let mut prior: Vec<PriorKnowledge> =
        levels.iter().zip(t.prior_knowledge).flat_map(|(l, c)| std::iter::repeat_n(*l, c)).collect();
    prior.shuffle(rng);
    let mut anim_first: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    anim_first.shuffle(rng);
    let low: Vec<bool> = prior.iter().map(|p| p.is_low()).collect();
    if low.iter().all(|l| *l) || !low.iter().any(|l| *l) {
        return Err(infeasible("both prior-knowledge groups need members"));
    }

    let t_seq = t_for_p(t.order_p, n as f64 - 2.0);
    let adv = advantage_direction(rng, &low, &anim_first, t.subgroup_t, t_seq)?;
    let (gain_a, gain_s) = paired_vectors(rng, &t.gain, &adv, "gain")?;
    let pre_a = pre_for(rng, &gain_a, t.pre[0], t.post[0], "animation")?;
    let pre_s = pre_for(rng, &gain_s, t.pre[1], t.post[1], "slides")?;

    let mut measure = |pt: &PairedTarget, name: &str| {
        let dir = fresh(rng, n, &[]);
        paired_vectors(rng, pt, &dir, name)
    };
    let (imi_a, imi_s) = measure(&t.imi, "imi")?;
    let (tlx_a, tlx_s) = measure(&t.tlx, "tlx")?;
    let (sat_a, sat_s) = measure(&t.satisfaction, "satisfaction")?;
    let (min_a, min_s) = measure(&t.minutes, "minutes")?;

    let imi_scores: Vec<f64> = imi_a.iter().chain(&imi_s).copied().collect();
    let tlx_scores: Vec<f64> = tlx_a.iter().chain(&tlx_s).copied().collect();
    let imi_items = items_for(rng, &imi_scores, IMI_ITEMS, (1.0, 7.0), t.imi_alpha, "imi")?;
    let tlx_items = items_for(rng, &tlx_scores, TLX_ITEMS, (0.0, 20.0), t.tlx_alpha, "tlx")?;

    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let k = rng.random_range(0..t.topics.len());
        let topic_a = t.topics[k].clone();
        let topic_s = t.topics[(k + 1) % t.topics.len()].clone();
        let sequence = if anim_first[i] { Sequence::AnimationFirst } else { Sequence::SlidesFirst };
        for (c, cond) in [Condition::Animation, Condition::Slides].into_iter().enumerate() {
            let j = i + c * n;
            let (pre, gain) = if c == 0 { (pre_a[i], gain_a[i]) } else { (pre_s[i], gain_s[i]) };
            let first = (cond == Condition::Animation) == anim_first[i];
            rows.push(StudyRow {
                participant_id: i as u32 + 1,
                sequence,
                condition: cond,
                topic: if c == 0 { topic_a.clone() } else { topic_s.clone() },
                period: if first { 1 } else { 2 },
                pre,
                post: pre + gain,
                imi_items: imi_items[j].clone().try_into().expect("six items"),
                tlx_items: tlx_items[j].clone().try_into().expect("six items"),
                satisfaction: if c == 0 { sat_a[i] } else { sat_s[i] },
                minutes: if c == 0 { min_a[i] } else { min_s[i] },
                prior_knowledge: prior[i],
                gain,
            });
        }
    }
    Ok(StudyDataset { rows })
}
