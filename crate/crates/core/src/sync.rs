//! Narration/visual timelines: extraction from drafts, alignment checks,
//! retiming and segmentation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::{DraftArtifact, Track};
use crate::plan::{LessonPlan, SceneId, ScenePlan, SegmentPolicy};
use crate::script::EventKind;

pub const DEFAULT_TOLERANCE_S: f64 = 0.5;
/// Narration pace used to estimate how long a cue is spoken.
pub const WORDS_PER_SECOND: f64 = 2.5;
pub const MIN_CUE_S: f64 = 0.5;
/// Slack for float noise when comparing times printed at 0.1 s resolution.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrationCue {
    pub cue_id: String,
    pub scene_id: SceneId,
    pub text: String,
    pub start_s: f64,
    pub est_duration_s: f64,
}

impl NarrationCue {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.est_duration_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualEvent {
    pub event_id: String,
    pub scene_id: SceneId,
    pub kind: EventKind,
    pub start_s: f64,
    pub duration_s: f64,
    /// Symbol tokens as annotated; `name` or `name:unit` when the script
    /// states the unit it uses the symbol in.
    pub target_symbols: Vec<String>,
}

impl VisualEvent {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    pub fn symbol_names(&self) -> impl Iterator<Item = &str> {
        self.target_symbols.iter().map(|t| split_symbol_token(t).0)
    }
}

/// Splits `v:m/s` into `("v", Some("m/s"))`.
pub fn split_symbol_token(token: &str) -> (&str, Option<&str>) {
    match token.split_once(':') {
        Some((name, unit)) if !unit.is_empty() => (name, Some(unit)),
        Some((name, _)) => (name, None),
        None => (token, None),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Binding {
    pub cue_id: String,
    pub event_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub scene_id: SceneId,
    pub cues: Vec<NarrationCue>,
    pub events: Vec<VisualEvent>,
    pub bindings: Vec<Binding>,
    pub scene_duration_s: f64,
}

impl Timeline {
    pub fn cue(&self, id: &str) -> Option<&NarrationCue> {
        self.cues.iter().find(|c| c.cue_id == id)
    }

    pub fn event(&self, id: &str) -> Option<&VisualEvent> {
        self.events.iter().find(|e| e.event_id == id)
    }

    pub fn end_s(&self) -> f64 {
        let cues = self.cues.iter().map(NarrationCue::end_s);
        let events = self.events.iter().map(VisualEvent::end_s);
        cues.chain(events).fold(0.0, f64::max)
    }

    pub fn unbound_cues(&self) -> Vec<&str> {
        let bound: BTreeSet<&str> = self.bindings.iter().map(|b| b.cue_id.as_str()).collect();
        self.cues.iter().map(|c| c.cue_id.as_str()).filter(|c| !bound.contains(c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum SyncError {
    #[error("{track} parse error at {position}: {message}")]
    ParseError { track: Track, position: usize, message: String },
    #[error("binding references unknown id `{id}`")]
    OrphanBinding { id: String },
    #[error("event `{event_id}` uses primitive `{kind}` which the scene does not allow")]
    DisallowedPrimitive { event_id: String, kind: String },
    #[error("cue `{cue_id}` does not start after the previous cue")]
    UnorderedCues { cue_id: String },
    #[error("artifacts belong to scene {found}, expected {expected}")]
    SceneMismatch { expected: SceneId, found: SceneId },
}

impl SyncError {
    /// Track whose regeneration can fix the error.
    pub fn track(&self) -> Track {
        match self {
            SyncError::ParseError { track, .. } => *track,
            SyncError::UnorderedCues { .. } => Track::Narration,
            _ => Track::Code,
        }
    }
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Parses `[[cue:<id> @ <seconds>]]` sentinels. Text before the first
/// sentinel is ignored; each cue's text runs to the next sentinel.
pub fn parse_cues(narration: &str, scene_id: SceneId, scene_duration_s: f64) -> Result<Vec<NarrationCue>, SyncError> {
    let err = |position: usize, message: &str| SyncError::ParseError {
        track: Track::Narration,
        position,
        message: message.to_string(),
    };
    let mut raw: Vec<(String, f64, usize, usize)> = Vec::new();
    let mut from = 0;
    while let Some(rel) = narration[from..].find("[[cue:") {
        let pos = from + rel;
        let body_start = pos + "[[cue:".len();
        let close = narration[body_start..].find("]]").ok_or_else(|| err(pos, "unterminated cue sentinel"))? + body_start;
        let body = &narration[body_start..close];
        let (id, ts) = body.split_once('@').ok_or_else(|| err(pos, "cue sentinel without `@`"))?;
        let id = id.trim();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(err(pos, "bad cue id"));
        }
        let t: f64 = ts.trim().parse().map_err(|_| err(pos, "malformed timestamp"))?;
        if !t.is_finite() || t < 0.0 {
            return Err(err(pos, "malformed timestamp"));
        }
        raw.push((id.to_string(), t, pos, close + 2));
        from = close + 2;
    }
    if raw.is_empty() {
        return Err(err(0, "no cue sentinels"));
    }
    let mut cues = Vec::with_capacity(raw.len());
    for (i, (id, start, _, text_start)) in raw.iter().enumerate() {
        let text_end = raw.get(i + 1).map(|r| r.2).unwrap_or(narration.len());
        let text = narration[*text_start..text_end].trim().to_string();
        let limit = raw.get(i + 1).map(|r| r.1).unwrap_or(scene_duration_s.max(*start));
        let gap = limit - start;
        if gap <= 0.0 && i + 1 < raw.len() {
            return Err(SyncError::UnorderedCues { cue_id: raw[i + 1].0.clone() });
        }
        let est = (word_count(&text) as f64 / WORDS_PER_SECOND).max(MIN_CUE_S);
        let est = if gap > 0.0 { est.min(gap) } else { est };
        cues.push(NarrationCue { cue_id: id.clone(), scene_id, text, start_s: *start, est_duration_s: est });
    }
    Ok(cues)
}

/// Parses `# @event` and `# @bind` annotations from a scene script.
pub fn parse_events(
    script: &str,
    scene_id: SceneId,
) -> Result<(Vec<VisualEvent>, Vec<Binding>), SyncError> {
    let err = |line: usize, message: &str| SyncError::ParseError {
        track: Track::Code,
        position: line,
        message: message.to_string(),
    };
    let mut events = Vec::new();
    let mut bindings = Vec::new();
    for (i, line) in script.lines().enumerate() {
        let n = i + 1;
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("# @event ") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            if f.len() < 4 {
                return Err(err(n, "event annotation needs id, kind, start and duration"));
            }
            let kind = EventKind::parse(f[1]).ok_or_else(|| err(n, "unknown event kind"))?;
            let start: f64 = f[2].parse().map_err(|_| err(n, "malformed event start"))?;
            let duration: f64 = f[3].parse().map_err(|_| err(n, "malformed event duration"))?;
            if !(start.is_finite() && duration.is_finite()) || start < 0.0 || duration < 0.0 {
                return Err(err(n, "negative or non-finite event time"));
            }
            events.push(VisualEvent {
                event_id: f[0].to_string(),
                scene_id,
                kind,
                start_s: start,
                duration_s: duration,
                target_symbols: f[4..].iter().map(|s| s.to_string()).collect(),
            });
        } else if let Some(rest) = t.strip_prefix("# @bind ") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            if f.len() != 2 {
                return Err(err(n, "bind annotation needs a cue id and an event id"));
            }
            bindings.push(Binding { cue_id: f[0].to_string(), event_id: f[1].to_string() });
        }
    }
    Ok((events, bindings))
}

/// Builds a scene timeline from its narration and code drafts.
pub fn extract_timeline(
    narration: &DraftArtifact,
    code: &DraftArtifact,
    scene: &ScenePlan,
) -> Result<Timeline, SyncError> {
    for a in [narration, code] {
        if a.scene_id != scene.scene_id {
            return Err(SyncError::SceneMismatch { expected: scene.scene_id, found: a.scene_id });
        }
    }
    let cues = parse_cues(&narration.content, scene.scene_id, scene.planned_duration_s)?;
    let (events, bindings) = parse_events(&code.content, scene.scene_id)?;

    let allowed: BTreeSet<&str> = scene.code_constraints.allowed_primitives.iter().map(String::as_str).collect();
    for e in &events {
        if !allowed.contains(e.kind.as_str()) {
            return Err(SyncError::DisallowedPrimitive { event_id: e.event_id.clone(), kind: e.kind.as_str().into() });
        }
    }
    let cue_ids: BTreeSet<&str> = cues.iter().map(|c| c.cue_id.as_str()).collect();
    let event_ids: BTreeSet<&str> = events.iter().map(|e| e.event_id.as_str()).collect();
    let mut event_bound: BTreeSet<&str> = BTreeSet::new();
    for b in &bindings {
        if !cue_ids.contains(b.cue_id.as_str()) {
            return Err(SyncError::OrphanBinding { id: b.cue_id.clone() });
        }
        if !event_ids.contains(b.event_id.as_str()) {
            return Err(SyncError::OrphanBinding { id: b.event_id.clone() });
        }
        // An event narrates at most one cue.
        if !event_bound.insert(b.event_id.as_str()) {
            return Err(SyncError::ParseError {
                track: Track::Code,
                position: 0,
                message: format!("event `{}` is bound more than once", b.event_id),
            });
        }
    }
    Ok(Timeline {
        scene_id: scene.scene_id,
        cues,
        events,
        bindings: bindings.clone(),
        scene_duration_s: scene.planned_duration_s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingDrift {
    pub cue_id: String,
    pub event_id: String,
    pub drift_s: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub scene_id: SceneId,
    pub tolerance_s: f64,
    pub drifts: Vec<BindingDrift>,
    pub unbound_cues: Vec<String>,
    pub pass: bool,
}

impl AlignmentReport {
    pub fn flagged(&self) -> impl Iterator<Item = &BindingDrift> {
        self.drifts.iter().filter(|d| d.flagged)
    }
}

/// Flags bindings whose cue/event start times differ by more than
/// `tolerance_s`. A drift equal to the tolerance passes.
pub fn check_alignment(t: &Timeline, tolerance_s: f64) -> AlignmentReport {
    let drifts: Vec<BindingDrift> = t
        .bindings
        .iter()
        .filter_map(|b| {
            let cue = t.cue(&b.cue_id)?;
            let ev = t.event(&b.event_id)?;
            let drift = (cue.start_s - ev.start_s).abs();
            Some(BindingDrift {
                cue_id: b.cue_id.clone(),
                event_id: b.event_id.clone(),
                drift_s: drift,
                flagged: drift > tolerance_s + EPS,
            })
        })
        .collect();
    let unbound: Vec<String> = t.unbound_cues().into_iter().map(str::to_string).collect();
    let pass = unbound.is_empty() && drifts.iter().all(|d| !d.flagged);
    AlignmentReport { scene_id: t.scene_id, tolerance_s, drifts, unbound_cues: unbound, pass }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetimeStrategy {
    ShiftEvents,
    ShiftCues,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetimeError {
    #[error("cannot retime: unbound cues {0:?}")]
    UnboundCues(Vec<String>),
    #[error("retime infeasible: {0}")]
    RetimeInfeasible(String),
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 - EPS && b.0 < a.1 - EPS
}

/// Moves the chosen side of every flagged binding onto the other side's
/// start time, then re-checks ordering, overlap and scene bounds.
pub fn retime(t: &Timeline, strategy: RetimeStrategy, tolerance_s: f64) -> Result<Timeline, RetimeError> {
    let report = check_alignment(t, tolerance_s);
    if !report.unbound_cues.is_empty() {
        return Err(RetimeError::UnboundCues(report.unbound_cues));
    }
    let mut out = t.clone();
    let flagged: Vec<&BindingDrift> = report.flagged().collect();
    if flagged.is_empty() {
        return Ok(out);
    }
    match strategy {
        RetimeStrategy::ShiftEvents => {
            let mut moved = BTreeSet::new();
            for d in &flagged {
                let cue_start = t.cue(&d.cue_id).map(|c| c.start_s).unwrap_or_default();
                if let Some(e) = out.events.iter_mut().find(|e| e.event_id == d.event_id) {
                    e.start_s = cue_start;
                    moved.insert(e.event_id.clone());
                }
            }
            for e in out.events.iter().filter(|e| moved.contains(&e.event_id)) {
                if e.end_s() > out.scene_duration_s + EPS {
                    return Err(RetimeError::RetimeInfeasible(format!(
                        "event `{}` would end after the scene",
                        e.event_id
                    )));
                }
                for other in out.events.iter().filter(|o| o.event_id != e.event_id) {
                    if overlaps((e.start_s, e.end_s()), (other.start_s, other.end_s())) {
                        return Err(RetimeError::RetimeInfeasible(format!(
                            "events `{}` and `{}` would overlap",
                            e.event_id, other.event_id
                        )));
                    }
                }
            }
        }
        RetimeStrategy::ShiftCues => {
            let mut targets: BTreeMap<&str, f64> = BTreeMap::new();
            for d in &flagged {
                let ev_start = t.event(&d.event_id).map(|e| e.start_s).unwrap_or_default();
                if let Some(prev) = targets.insert(d.cue_id.as_str(), ev_start) {
                    if (prev - ev_start).abs() > EPS {
                        return Err(RetimeError::RetimeInfeasible(format!(
                            "cue `{}` is bound to events at different times",
                            d.cue_id
                        )));
                    }
                }
            }
            for c in out.cues.iter_mut() {
                if let Some(start) = targets.get(c.cue_id.as_str()) {
                    c.start_s = *start;
                }
            }
            for w in out.cues.windows(2) {
                if w[1].start_s < w[0].end_s() - EPS {
                    return Err(RetimeError::RetimeInfeasible(format!(
                        "cues `{}` and `{}` would overlap",
                        w[0].cue_id, w[1].cue_id
                    )));
                }
            }
            if let Some(last) = out.cues.last() {
                if last.end_s() > out.scene_duration_s + EPS {
                    return Err(RetimeError::RetimeInfeasible(format!(
                        "cue `{}` would end after the scene",
                        last.cue_id
                    )));
                }
            }
        }
    }
    // Other bindings of a moved item may now drift.
    if !check_alignment(&out, tolerance_s).pass {
        return Err(RetimeError::RetimeInfeasible("retimed timeline still drifts".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum SegmentFlag {
    SceneTooShort { scene_id: SceneId, duration_s: f64 },
    SceneTooLong { scene_id: SceneId, duration_s: f64 },
    /// Narration or animation runs past the scene's planned end.
    ContentOverrun { scene_id: SceneId, end_s: f64, duration_s: f64 },
    TotalDurationDrift { total_s: f64, target_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub flags: Vec<SegmentFlag>,
    pub total_s: f64,
    pub pass: bool,
}

pub fn check_segmentation(timelines: &[Timeline], plan: &LessonPlan, policy: &SegmentPolicy) -> SegmentationReport {
    let mut flags = Vec::new();
    for t in timelines {
        let d = t.scene_duration_s;
        if d < policy.min_scene_s {
            flags.push(SegmentFlag::SceneTooShort { scene_id: t.scene_id, duration_s: d });
        } else if d > policy.max_scene_s {
            flags.push(SegmentFlag::SceneTooLong { scene_id: t.scene_id, duration_s: d });
        }
        let end = t.end_s();
        if end > d + EPS {
            flags.push(SegmentFlag::ContentOverrun { scene_id: t.scene_id, end_s: end, duration_s: d });
        }
    }
    let total: f64 = timelines.iter().map(|t| t.scene_duration_s).sum();
    let target = plan.brief.target_duration_s;
    let (lo, hi) = policy.total_bounds(target);
    if total < lo - EPS || total > hi + EPS {
        flags.push(SegmentFlag::TotalDurationDrift { total_s: total, target_s: target });
    }
    let pass = flags.is_empty();
    SegmentationReport { flags, total_s: total, pass }
}
