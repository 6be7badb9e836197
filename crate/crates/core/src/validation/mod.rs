//! Pre-render checks for one scene and the routing decision that follows.

pub mod faults;

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, RenderEngine};
use crate::generation::{
    regenerate_part, DraftArtifact, GenerationConfig, GenerationError, GeneratorBackend, ScenePair, TemplateSet,
    Track,
};
use crate::plan::{LessonPlan, SceneId, ScenePlan, SymbolLedger, SymbolUsage, Violation};
use crate::script::{imports, latex_fragments, rewrite_event_start, DEFAULT_IMPORT_WHITELIST};
use crate::sync::{
    check_alignment, extract_timeline, retime, split_symbol_token, RetimeError, RetimeStrategy, Timeline,
    DEFAULT_TOLERANCE_S,
};
use crate::units::parse_unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Run,
    Alignment,
    SymbolUnit,
    GoalCoverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackHint {
    Narration,
    Code,
    Either,
}

impl From<Track> for TrackHint {
    fn from(t: Track) -> Self {
        match t {
            Track::Narration => TrackHint::Narration,
            Track::Code => TrackHint::Code,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCode {
    ForbiddenImport,
    LatexError,
    NondeterministicRun,
    RuntimeFault,
    RunTimeout,
    TimelineUnreadable,
    DriftRepairable,
    DriftUnrepairable,
    UnboundCue,
    UnregisteredSymbol,
    DimensionMismatch,
    BadUnitContext,
    MissingKeyword,
    NoSignalEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Locus {
    pub track: Track,
    /// 1-based line in the artifact, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValidationFinding {
    pub check: Check,
    pub scene_id: SceneId,
    pub severity: Severity,
    pub code: FindingCode,
    pub track_hint: TrackHint,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locus: Option<Locus>,
}

impl ValidationFinding {
    fn new(check: Check, scene_id: SceneId, severity: Severity, code: FindingCode, hint: TrackHint) -> Self {
        Self { check, scene_id, severity, code, track_hint: hint, message: String::new(), locus: None }
    }

    fn msg(mut self, m: impl Into<String>) -> Self {
        self.message = m.into();
        self
    }

    fn at(mut self, track: Track, line: Option<usize>) -> Self {
        self.locus = Some(Locus { track, line });
        self
    }

    /// The track a regeneration should target. `Either` resolves to the
    /// track the offending text lives in, else code.
    pub fn target_track(&self) -> Track {
        match self.track_hint {
            TrackHint::Narration => Track::Narration,
            TrackHint::Code => Track::Code,
            TrackHint::Either => self.locus.map(|l| l.track).unwrap_or(Track::Code),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackNumbers {
    pub narration: u32,
    pub code: u32,
}

impl TrackNumbers {
    pub fn get(&self, t: Track) -> u32 {
        match t {
            Track::Narration => self.narration,
            Track::Code => self.code,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scene_id: SceneId,
    pub findings: Vec<ValidationFinding>,
    pub passed: bool,
    pub checked_versions: TrackNumbers,
    /// Generation attempts behind the checked artifacts; routing uses them
    /// to decide when to stop regenerating.
    pub checked_attempts: TrackNumbers,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &ValidationFinding> {
        self.findings.iter().filter(|f| f.is_error())
    }

    pub fn checks_with_errors(&self) -> BTreeSet<Check> {
        self.errors().map(|f| f.check).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub tolerance_s: f64,
    /// Dry-run budget per scene; `None` uses the engine's default.
    #[serde(default)]
    pub budget_s: Option<f64>,
    pub import_whitelist: Vec<String>,
    pub max_attempts: u32,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            tolerance_s: DEFAULT_TOLERANCE_S,
            budget_s: None,
            import_whitelist: DEFAULT_IMPORT_WHITELIST.iter().map(|s| s.to_string()).collect(),
            max_attempts: GenerationConfig::default().max_attempts,
        }
    }
}

/// Import whitelist, LaTeX and double seeded dry run.
pub fn run_check(
    code: &DraftArtifact,
    engine: &dyn RenderEngine,
    budget: Duration,
    seed: u64,
    whitelist: &[String],
) -> Result<Vec<ValidationFinding>, EngineError> {
    let sid = code.scene_id;
    let finding = |code| ValidationFinding::new(Check::Run, sid, Severity::Error, code, TrackHint::Code);
    let mut out = Vec::new();
    for (line, module) in imports(&code.content) {
        if !whitelist.iter().any(|w| *w == module) {
            out.push(
                finding(FindingCode::ForbiddenImport)
                    .msg(format!("import of `{module}` is not allowed"))
                    .at(Track::Code, Some(line)),
            );
        }
    }
    for (line, fragment) in latex_fragments(&code.content) {
        if let Err(diag) = engine.check_latex(&fragment) {
            out.push(
                finding(FindingCode::LatexError)
                    .msg(format!("LaTeX `{fragment}`: {diag}"))
                    .at(Track::Code, Some(line)),
            );
        }
    }
    let first = engine.dry_run(&code.content, seed, budget);
    let second = engine.dry_run(&code.content, seed, budget);
    match (first, second) {
        (Ok(a), Ok(b)) => {
            if a != b {
                let line = a.trace.iter().zip(&b.trace).position(|(x, y)| x != y);
                out.push(
                    finding(FindingCode::NondeterministicRun)
                        .msg(format!(
                            "two runs with seed {seed} produced different traces (first difference at step {})",
                            line.unwrap_or(a.trace.len().min(b.trace.len()))
                        ))
                        .at(Track::Code, None),
                );
            }
        }
        (Err(EngineError::RuntimeFault { line, diagnostic }), _) | (_, Err(EngineError::RuntimeFault { line, diagnostic })) => {
            out.push(
                finding(FindingCode::RuntimeFault)
                    .msg(format!("runtime fault: {diagnostic}"))
                    .at(Track::Code, Some(line)),
            );
        }
        (Err(EngineError::Timeout { budget_s }), _) | (_, Err(EngineError::Timeout { budget_s })) => {
            out.push(
                finding(FindingCode::RunTimeout)
                    .msg(format!("dry run did not finish within {budget_s} s"))
                    .at(Track::Code, None),
            );
        }
        (Err(e @ EngineError::EngineUnavailable { .. }), _) | (_, Err(e @ EngineError::EngineUnavailable { .. })) => {
            return Err(e)
        }
    }
    Ok(out)
}

/// Alignment findings: repairable drift is a warning, everything else an error.
pub fn alignment_check(t: &Timeline, tolerance_s: f64) -> Vec<ValidationFinding> {
    let report = check_alignment(t, tolerance_s);
    let mut out = Vec::new();
    for cue in &report.unbound_cues {
        out.push(
            ValidationFinding::new(Check::Alignment, t.scene_id, Severity::Error, FindingCode::UnboundCue, TrackHint::Narration)
                .msg(format!("cue `{cue}` has no bound visual event"))
                .at(Track::Narration, None),
        );
    }
    let flagged: Vec<_> = report.flagged().collect();
    if flagged.is_empty() || !report.unbound_cues.is_empty() {
        return out;
    }
    let repairable = retime(t, RetimeStrategy::ShiftEvents, tolerance_s).is_ok();
    for d in flagged {
        let (severity, code) = if repairable {
            (Severity::Warning, FindingCode::DriftRepairable)
        } else {
            (Severity::Error, FindingCode::DriftUnrepairable)
        };
        out.push(
            ValidationFinding::new(Check::Alignment, t.scene_id, severity, code, TrackHint::Code)
                .msg(format!(
                    "event `{}` starts {:.2} s away from cue `{}` (tolerance {tolerance_s} s)",
                    d.event_id, d.drift_s, d.cue_id
                ))
                .at(Track::Code, None),
        );
    }
    out
}

/// Symbols mentioned in narration as `$...$` spans, with line numbers.
pub fn narration_symbols(narration: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (i, line) in narration.lines().enumerate() {
        let mut parts = line.split('$');
        parts.next();
        while let (Some(inner), Some(_)) = (parts.next(), parts.clone().next()) {
            let s = inner.trim();
            if !s.is_empty() {
                out.push((i + 1, s.to_string()));
            }
            parts.next();
        }
    }
    out
}

fn event_lines(script: &str) -> Vec<(usize, String, Vec<String>)> {
    script
        .lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let rest = l.trim().strip_prefix("# @event ")?;
            let f: Vec<&str> = rest.split_whitespace().collect();
            (f.len() >= 4).then(|| (i + 1, f[0].to_string(), f[4..].iter().map(|s| s.to_string()).collect()))
        })
        .collect()
}

/// Checks event symbols and narration mentions against the ledger.
pub fn symbol_unit_check(
    ledger: &SymbolLedger,
    scene_id: SceneId,
    narration: &DraftArtifact,
    code: &DraftArtifact,
) -> Vec<ValidationFinding> {
    let mut out = Vec::new();
    let mut usages: Vec<(SymbolUsage, Track, usize)> = Vec::new();
    for (line, _event, tokens) in event_lines(&code.content) {
        for tok in tokens {
            let (name, unit) = split_symbol_token(&tok);
            let context_dimension = match unit.map(parse_unit) {
                Some(Ok(d)) => Some(d),
                Some(Err(e)) => {
                    out.push(
                        ValidationFinding::new(
                            Check::SymbolUnit,
                            scene_id,
                            Severity::Error,
                            FindingCode::BadUnitContext,
                            TrackHint::Either,
                        )
                        .msg(format!("symbol `{name}` carries an unreadable unit: {e}"))
                        .at(Track::Code, Some(line)),
                    );
                    continue;
                }
                None => None,
            };
            usages.push((SymbolUsage { symbol: name.to_string(), scene_id, context_dimension }, Track::Code, line));
        }
    }
    for (line, sym) in narration_symbols(&narration.content) {
        usages.push((SymbolUsage { symbol: sym, scene_id, context_dimension: None }, Track::Narration, line));
    }
    for (usage, track, line) in usages {
        for v in ledger.check_usage(std::slice::from_ref(&usage)) {
            let (code, message) = match &v {
                Violation::UnregisteredSymbol { symbol, .. } => {
                    (FindingCode::UnregisteredSymbol, format!("symbol `{symbol}` is not in the ledger"))
                }
                Violation::DimensionMismatch { symbol, expected, found, .. } => (
                    FindingCode::DimensionMismatch,
                    format!("symbol `{symbol}` is used as {found} but the ledger says {expected}"),
                ),
            };
            out.push(
                ValidationFinding::new(Check::SymbolUnit, scene_id, Severity::Error, code, TrackHint::Either)
                    .msg(message)
                    .at(track, Some(line)),
            );
        }
    }
    out
}

/// Whole-word, case-insensitive search. Word characters are Unicode
/// alphanumerics and `_`.
pub fn contains_word(haystack: &str, word: &str) -> bool {
    let hay = haystack.to_lowercase();
    let w = word.to_lowercase();
    if w.is_empty() {
        return false;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let mut from = 0;
    while let Some(rel) = hay[from..].find(&w) {
        let start = from + rel;
        let end = start + w.len();
        let before = hay[..start].chars().next_back();
        let after = hay[end..].chars().next();
        if !before.is_some_and(is_word) && !after.is_some_and(is_word) {
            return true;
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

/// Narration text without cue sentinels.
fn spoken_text(narration: &str) -> String {
    let mut out = String::with_capacity(narration.len());
    let mut rest = narration;
    while let Some(i) = rest.find("[[cue:") {
        out.push_str(&rest[..i]);
        match rest[i..].find("]]") {
            Some(j) => rest = &rest[i + j + 2..],
            None => {
                rest = "";
            }
        }
        out.push(' ');
    }
    out.push_str(rest);
    out
}

/// Every keyword must be spoken, and some highlight or transform must
/// target a ledger symbol named among the keywords.
pub fn goal_coverage_check(
    scene: &ScenePlan,
    ledger: &SymbolLedger,
    narration: &DraftArtifact,
    timeline: Option<&Timeline>,
) -> Vec<ValidationFinding> {
    let sid = scene.scene_id;
    let mut out = Vec::new();
    let spoken = spoken_text(&narration.content);
    for kw in scene.goal_keywords.iter().filter(|k| !k.trim().is_empty()) {
        if !contains_word(&spoken, kw.trim()) {
            out.push(
                ValidationFinding::new(Check::GoalCoverage, sid, Severity::Error, FindingCode::MissingKeyword, TrackHint::Narration)
                    .msg(format!("goal keyword `{}` is never spoken", kw.trim()))
                    .at(Track::Narration, None),
            );
        }
    }
    if let Some(t) = timeline {
        let key_symbols: BTreeSet<&str> = scene
            .goal_keywords
            .iter()
            .map(|k| k.trim())
            .filter(|k| ledger.get(k).is_some())
            .collect();
        let shown = t
            .events
            .iter()
            .filter(|e| e.kind.is_signal())
            .any(|e| e.symbol_names().any(|n| key_symbols.contains(n)));
        if !shown {
            out.push(
                ValidationFinding::new(Check::GoalCoverage, sid, Severity::Error, FindingCode::NoSignalEvent, TrackHint::Code)
                    .msg(format!(
                        "no highlight or transform targets a key symbol ({})",
                        key_symbols.into_iter().collect::<Vec<_>>().join(", ")
                    ))
                    .at(Track::Code, None),
            );
        }
    }
    out
}

/// Runs every check on one scene. The timeline is returned when it could be
/// extracted.
pub fn validate_scene(
    plan: &LessonPlan,
    scene: &ScenePlan,
    pair: &ScenePair,
    engine: &dyn RenderEngine,
    config: &ValidationConfig,
) -> Result<(ValidationReport, Option<Timeline>), EngineError> {
    let sid = scene.scene_id;
    let budget = config.budget_s.map(Duration::from_secs_f64).unwrap_or_else(|| engine.default_budget());
    let mut findings = run_check(&pair.code, engine, budget, plan.seed, &config.import_whitelist)?;
    let timeline = match extract_timeline(&pair.narration, &pair.code, scene) {
        Ok(t) => Some(t),
        Err(e) => {
            findings.push(
                ValidationFinding::new(Check::Alignment, sid, Severity::Error, FindingCode::TimelineUnreadable, e.track().into())
                    .msg(e.to_string())
                    .at(e.track(), None),
            );
            None
        }
    };
    if let Some(t) = &timeline {
        findings.extend(alignment_check(t, config.tolerance_s));
    }
    findings.extend(symbol_unit_check(&plan.ledger, sid, &pair.narration, &pair.code));
    findings.extend(goal_coverage_check(scene, &plan.ledger, &pair.narration, timeline.as_ref()));
    findings.sort();
    findings.dedup();
    let passed = !findings.iter().any(ValidationFinding::is_error);
    let report = ValidationReport {
        scene_id: sid,
        findings,
        passed,
        checked_versions: TrackNumbers { narration: pair.narration.version, code: pair.code.version },
        checked_attempts: TrackNumbers {
            narration: pair.narration.provenance.attempt,
            code: pair.code.provenance.attempt,
        },
    };
    Ok((report, timeline))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Merge,
    /// Only repairable drift was found; retime the code track instead of
    /// regenerating it.
    Retime { scene_id: SceneId, track: Track },
    Regenerate { scene_id: SceneId, track: Track },
    EscalateToReview { scene_id: SceneId, track: Track },
}

/// Picks the next step for a scene. Errors regenerate the track of the
/// most severe finding, code first on ties; a track already at
/// `max_attempts` escalates to review instead.
pub fn route(report: &ValidationReport, max_attempts: u32) -> Decision {
    let sid = report.scene_id;
    let worst = report.findings.iter().map(|f| f.severity).max();
    match worst {
        Some(Severity::Error) => {
            let mut tracks: Vec<Track> = report.errors().map(ValidationFinding::target_track).collect();
            tracks.sort_by_key(|t| Reverse(*t == Track::Code));
            let track = tracks[0];
            if report.checked_attempts.get(track) >= max_attempts {
                Decision::EscalateToReview { scene_id: sid, track }
            } else {
                Decision::Regenerate { scene_id: sid, track }
            }
        }
        Some(Severity::Warning) if report.findings.iter().any(|f| f.code == FindingCode::DriftRepairable) => {
            Decision::Retime { scene_id: sid, track: Track::Code }
        }
        _ => Decision::Merge,
    }
}

/// Findings for one track, one per line, as injected into a repair prompt.
pub fn repair_context(report: &ValidationReport, track: Track) -> String {
    report
        .findings
        .iter()
        .filter(|f| f.target_track() == track)
        .map(|f| {
            let check = serde_json::to_value(f.check).ok().and_then(|v| v.as_str().map(str::to_string));
            format!("[{}] {}", check.unwrap_or_default(), f.message)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Applies a retime to the code draft, returning a revised artifact.
pub fn apply_retime(code: &DraftArtifact, timeline: &Timeline, tolerance_s: f64) -> Result<DraftArtifact, RetimeError> {
    let fixed = retime(timeline, RetimeStrategy::ShiftEvents, tolerance_s)?;
    let mut content = code.content.clone();
    for (before, after) in timeline.events.iter().zip(&fixed.events) {
        if before.start_s != after.start_s {
            content = rewrite_event_start(&content, &after.event_id, after.start_s)
                .ok_or_else(|| RetimeError::RetimeInfeasible(format!("event `{}` not in script", after.event_id)))?;
        }
    }
    Ok(code.revised(content))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepairOutcome {
    /// Nothing to repair.
    Unchanged,
    Repaired { track: Track, artifact: DraftArtifact },
    Escalated { track: Track },
}

#[derive(Debug, thiserror::Error)]
pub enum RepairError {
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Retime(#[from] RetimeError),
    #[error("retime requested but the timeline could not be extracted")]
    NoTimeline,
}

/// Carries out one routing decision on a scene pair.
pub fn repair_once(
    plan: &LessonPlan,
    pair: &ScenePair,
    report: &ValidationReport,
    timeline: Option<&Timeline>,
    backend: &dyn GeneratorBackend,
    templates: &TemplateSet,
    gen: &GenerationConfig,
    config: &ValidationConfig,
) -> Result<RepairOutcome, RepairError> {
    match route(report, config.max_attempts) {
        Decision::Merge => Ok(RepairOutcome::Unchanged),
        Decision::EscalateToReview { track, .. } => Ok(RepairOutcome::Escalated { track }),
        Decision::Retime { track, .. } => {
            let t = timeline.ok_or(RepairError::NoTimeline)?;
            let artifact = apply_retime(&pair.code, t, config.tolerance_s)?;
            Ok(RepairOutcome::Repaired { track, artifact })
        }
        Decision::Regenerate { track, .. } => {
            let prior = pair.get(track);
            match regenerate_part(plan, prior, &repair_context(report, track), backend, templates, gen) {
                Ok(artifact) => Ok(RepairOutcome::Repaired { track, artifact }),
                Err(GenerationError::MaxAttemptsExceeded { .. }) => Ok(RepairOutcome::Escalated { track }),
                Err(e) => Err(e.into()),
            }
        }
    }
}
