//! Long-format study data: one row per participant and condition.
//!
//! CSV columns, in order:
//! `participant_id,sequence,condition,topic,period,pre,post,imi_1..imi_6,
//! tlx_1..tlx_6,satisfaction,minutes,prior_knowledge,gain`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::StatsError;

pub const IMI_ITEMS: usize = 6;
pub const TLX_ITEMS: usize = 6;
const GAIN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequence {
    AnimationFirst,
    SlidesFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Animation,
    Slides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKnowledge {
    None,
    Basic,
    Intermediate,
    Advanced,
}

impl PriorKnowledge {
    /// The low group pools none and basic.
    pub fn is_low(self) -> bool {
        matches!(self, PriorKnowledge::None | PriorKnowledge::Basic)
    }
}

fn enum_str<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|j| j.as_str().map(str::to_string)).unwrap_or_default()
}

fn parse_enum<T: for<'de> Deserialize<'de>>(s: &str) -> Option<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub participant_id: u32,
    pub sequence: Sequence,
    pub condition: Condition,
    pub topic: String,
    pub period: u8,
    pub pre: f64,
    pub post: f64,
    pub imi_items: [f64; IMI_ITEMS],
    pub tlx_items: [f64; TLX_ITEMS],
    pub satisfaction: f64,
    pub minutes: f64,
    pub prior_knowledge: PriorKnowledge,
    pub gain: f64,
}

impl StudyRow {
    pub fn imi(&self) -> f64 {
        self.imi_items.iter().sum::<f64>() / IMI_ITEMS as f64
    }

    pub fn tlx(&self) -> f64 {
        self.tlx_items.iter().sum::<f64>() / TLX_ITEMS as f64
    }
}

pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> =
        ["participant_id", "sequence", "condition", "topic", "period", "pre", "post"].map(String::from).to_vec();
    h.extend((1..=IMI_ITEMS).map(|i| format!("imi_{i}")));
    h.extend((1..=TLX_ITEMS).map(|i| format!("tlx_{i}")));
    h.extend(["satisfaction", "minutes", "prior_knowledge", "gain"].map(String::from));
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDataset {
    pub rows: Vec<StudyRow>,
}

fn violation(row: usize, field: &str, reason: impl Into<String>) -> StatsError {
    StatsError::SchemaViolation { row, field: field.to_string(), reason: reason.into() }
}

impl StudyDataset {
    /// Checks ranges, `gain = post - pre`, period against sequence, and that
    /// every participant has exactly one row per condition. Rows are
    /// numbered from 1.
    pub fn validate(&self) -> Result<(), StatsError> {
        let mut seen: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            let row = i + 1;
            let range = |field: &str, v: f64, lo: f64, hi: f64| {
                if v.is_finite() && (lo..=hi).contains(&v) {
                    Ok(())
                } else {
                    Err(violation(row, field, format!("{v} outside [{lo}, {hi}]")))
                }
            };
            range("pre", r.pre, 0.0, 100.0)?;
            range("post", r.post, 0.0, 100.0)?;
            for (j, v) in r.imi_items.iter().enumerate() {
                range(&format!("imi_{}", j + 1), *v, 1.0, 7.0)?;
            }
            for (j, v) in r.tlx_items.iter().enumerate() {
                range(&format!("tlx_{}", j + 1), *v, 0.0, 20.0)?;
            }
            range("satisfaction", r.satisfaction, 1.0, 7.0)?;
            if !(r.minutes.is_finite() && r.minutes > 0.0) {
                return Err(violation(row, "minutes", "must be positive"));
            }
            if (r.gain - (r.post - r.pre)).abs() > GAIN_TOLERANCE {
                return Err(violation(row, "gain", "gain must equal post - pre"));
            }
            let first = matches!(
                (r.sequence, r.condition),
                (Sequence::AnimationFirst, Condition::Animation) | (Sequence::SlidesFirst, Condition::Slides)
            );
            if r.period != if first { 1 } else { 2 } {
                return Err(violation(row, "period", "period does not match sequence and condition"));
            }
            seen.entry(r.participant_id).or_default().push(i);
        }
        for idx in seen.values() {
            let row = idx[0] + 1;
            if idx.len() != 2 {
                return Err(violation(row, "condition", "participant needs exactly one row per condition"));
            }
            let (a, b) = (&self.rows[idx[0]], &self.rows[idx[1]]);
            if a.condition == b.condition {
                return Err(violation(idx[1] + 1, "condition", "duplicate condition for participant"));
            }
            if a.sequence != b.sequence {
                return Err(violation(idx[1] + 1, "sequence", "sequence differs between a participant's rows"));
            }
            if a.prior_knowledge != b.prior_knowledge {
                return Err(violation(idx[1] + 1, "prior_knowledge", "prior knowledge differs between rows"));
            }
        }
        Ok(())
    }

    /// `(animation row, slides row)` per participant, by participant id.
    /// Assumes `validate` passed.
    pub fn pairs(&self) -> Vec<(&StudyRow, &StudyRow)> {
        let mut by_id: BTreeMap<u32, [Option<&StudyRow>; 2]> = BTreeMap::new();
        for r in &self.rows {
            let slot = by_id.entry(r.participant_id).or_default();
            slot[if r.condition == Condition::Animation { 0 } else { 1 }] = Some(r);
        }
        by_id.into_values().filter_map(|[a, s]| Some((a?, s?))).collect()
    }

    /// A measure split into aligned animation and slides vectors.
    pub fn paired(&self, f: impl Fn(&StudyRow) -> f64) -> (Vec<f64>, Vec<f64>) {
        self.pairs().into_iter().map(|(a, s)| (f(a), f(s))).unzip()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(csv_header())?;
        for r in &self.rows {
            let mut rec = vec![
                r.participant_id.to_string(),
                enum_str(&r.sequence),
                enum_str(&r.condition),
                r.topic.clone(),
                r.period.to_string(),
                r.pre.to_string(),
                r.post.to_string(),
            ];
            rec.extend(r.imi_items.iter().map(f64::to_string));
            rec.extend(r.tlx_items.iter().map(f64::to_string));
            rec.extend([r.satisfaction.to_string(), r.minutes.to_string(), enum_str(&r.prior_knowledge), r.gain.to_string()]);
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads and validates CSV with exactly the documented header.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, StatsError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(|e| violation(0, "header", e.to_string()))?.clone();
        let expected = csv_header();
        if header.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            let bad = expected
                .iter()
                .enumerate()
                .find(|(i, h)| header.get(*i) != Some(h.as_str()))
                .map_or("header".to_string(), |(_, h)| h.clone());
            return Err(violation(0, &bad, "header does not match the documented columns"));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| violation(row, "record", e.to_string()))?;
            let get = |k: usize| rec.get(k).unwrap_or("").trim();
            let num = |k: usize| -> Result<f64, StatsError> {
                get(k).parse().map_err(|_| violation(row, &expected[k], format!("not a number: `{}`", get(k))))
            };
            let en = |k: usize| violation(row, &expected[k], format!("unknown value `{}`", get(k)));
            let mut imi = [0.0; IMI_ITEMS];
            for (j, v) in imi.iter_mut().enumerate() {
                *v = num(7 + j)?;
            }
            let mut tlx = [0.0; TLX_ITEMS];
            for (j, v) in tlx.iter_mut().enumerate() {
                *v = num(7 + IMI_ITEMS + j)?;
            }
            let base = 7 + IMI_ITEMS + TLX_ITEMS;
            rows.push(StudyRow {
                participant_id: get(0).parse().map_err(|_| violation(row, "participant_id", "not an integer"))?,
                sequence: parse_enum(get(1)).ok_or_else(|| en(1))?,
                condition: parse_enum(get(2)).ok_or_else(|| en(2))?,
                topic: get(3).to_string(),
                period: get(4).parse().map_err(|_| violation(row, "period", "not an integer"))?,
                pre: num(5)?,
                post: num(6)?,
                imi_items: imi,
                tlx_items: tlx,
                satisfaction: num(base)?,
                minutes: num(base + 1)?,
                prior_knowledge: parse_enum(get(base + 2)).ok_or_else(|| en(base + 2))?,
                gain: num(base + 3)?,
            });
        }
        let ds = StudyDataset { rows };
        ds.validate()?;
        Ok(ds)
    }
}
