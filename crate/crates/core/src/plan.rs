//! Briefs, lesson plans, scene plans and the project-wide symbol ledger.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{parse_unit, Dimension, UnitError};

/// Ordinal scene identifier, contiguous from 1 within a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneId(pub u32);

impl fmt::Display for SceneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudienceLevel {
    None,
    Basic,
    Intermediate,
    Advanced,
}

impl AudienceLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            AudienceLevel::None => "none",
            AudienceLevel::Basic => "basic",
            AudienceLevel::Intermediate => "intermediate",
            AudienceLevel::Advanced => "advanced",
        }
    }
}

/// Briefs accept target durations in this range (seconds).
pub const BRIEF_DURATION_RANGE: (f64, f64) = (180.0, 600.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptBrief {
    pub topic_title: String,
    pub audience_level: AudienceLevel,
    pub learning_objective: String,
    pub target_duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BriefError {
    #[error("topic title is empty")]
    EmptyTopic,
    #[error("learning objective is empty")]
    EmptyObjective,
    #[error("target duration {0} s is outside [180, 600]")]
    DurationOutOfRange(String),
}

impl ConceptBrief {
    pub fn check(&self) -> Result<(), BriefError> {
        if self.topic_title.trim().is_empty() {
            return Err(BriefError::EmptyTopic);
        }
        if self.learning_objective.trim().is_empty() {
            return Err(BriefError::EmptyObjective);
        }
        let (lo, hi) = BRIEF_DURATION_RANGE;
        if !(lo..=hi).contains(&self.target_duration_s) {
            return Err(BriefError::DurationOutOfRange(self.target_duration_s.to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    /// Display notation, e.g. `v` or `λ`.
    pub name: String,
    pub meaning: String,
    pub unit_expr: String,
    pub dimension: Dimension,
    #[serde(default)]
    pub assumptions: Vec<String>,
    pub introduced_in_scene: SceneId,
}

impl SymbolEntry {
    /// Builds an entry whose dimension is parsed from `unit_expr`.
    pub fn new(
        name: impl Into<String>,
        meaning: impl Into<String>,
        unit_expr: impl Into<String>,
        introduced_in_scene: SceneId,
    ) -> Result<Self, UnitError> {
        let unit_expr = unit_expr.into();
        let dimension = parse_unit(&unit_expr)?;
        Ok(Self {
            name: name.into(),
            meaning: meaning.into(),
            unit_expr,
            dimension,
            assumptions: Vec::new(),
            introduced_in_scene,
        })
    }

    pub fn with_assumption(mut self, a: impl Into<String>) -> Self {
        self.assumptions.push(a.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("symbol `{0}` already registered with a different meaning or dimension")]
    DuplicateSymbol(String),
    #[error("symbol `{name}`: dimension does not match unit `{unit_expr}`")]
    InconsistentDimension { name: String, unit_expr: String },
    #[error("symbol `{name}`: {source}")]
    BadUnit { name: String, source: UnitError },
    #[error("symbol `{0}` has an empty meaning")]
    EmptyMeaning(String),
}

/// Outcome of a successful [`SymbolLedger::register`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Registration {
    Added,
    AlreadyPresent,
}

/// Project-wide registry of notation, meaning and units.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolLedger {
    entries: Vec<SymbolEntry>,
}

impl SymbolLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[SymbolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&SymbolEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Adds `entry`, or does nothing if an entry with the same name, meaning
    /// and dimension is already present. A clash on meaning or dimension is
    /// notation drift and is rejected.
    pub fn register(&mut self, entry: SymbolEntry) -> Result<Registration, LedgerError> {
        check_entry(&entry)?;
        if let Some(existing) = self.get(&entry.name) {
            if existing.meaning == entry.meaning && existing.dimension == entry.dimension {
                return Ok(Registration::AlreadyPresent);
            }
            return Err(LedgerError::DuplicateSymbol(entry.name));
        }
        self.entries.push(entry);
        Ok(Registration::Added)
    }

    /// Returns one violation per usage that is unregistered or used with a
    /// dimension other than the registered one.
    pub fn check_usage(&self, usages: &[SymbolUsage]) -> Vec<Violation> {
        usages
            .iter()
            .filter_map(|u| match self.get(&u.symbol) {
                None => Some(Violation::UnregisteredSymbol {
                    symbol: u.symbol.clone(),
                    scene_id: u.scene_id,
                }),
                Some(entry) => match &u.context_dimension {
                    Some(found) if *found != entry.dimension => Some(Violation::DimensionMismatch {
                        symbol: u.symbol.clone(),
                        scene_id: u.scene_id,
                        expected: entry.dimension,
                        found: *found,
                    }),
                    _ => None,
                },
            })
            .collect()
    }
}

fn check_entry(entry: &SymbolEntry) -> Result<(), LedgerError> {
    if entry.meaning.trim().is_empty() {
        return Err(LedgerError::EmptyMeaning(entry.name.clone()));
    }
    let parsed = parse_unit(&entry.unit_expr).map_err(|source| LedgerError::BadUnit {
        name: entry.name.clone(),
        source,
    })?;
    if parsed != entry.dimension {
        return Err(LedgerError::InconsistentDimension {
            name: entry.name.clone(),
            unit_expr: entry.unit_expr.clone(),
        });
    }
    Ok(())
}

/// A symbol occurrence extracted from a scene.
///
/// `context_dimension` is `None` when the occurrence carries no unit
/// context; only registration is checked then.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolUsage {
    pub symbol: String,
    pub scene_id: SceneId,
    pub context_dimension: Option<Dimension>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnregisteredSymbol {
        symbol: String,
        scene_id: SceneId,
    },
    DimensionMismatch {
        symbol: String,
        scene_id: SceneId,
        expected: Dimension,
        found: Dimension,
    },
}

impl Violation {
    pub fn symbol(&self) -> &str {
        match self {
            Violation::UnregisteredSymbol { symbol, .. } | Violation::DimensionMismatch { symbol, .. } => {
                symbol
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeConstraints {
    pub allowed_primitives: Vec<String>,
    #[serde(default)]
    pub layout_hints: Vec<String>,
    /// Planned start of each narration cue, parallel to `ScenePlan::narration_cues`.
    #[serde(default)]
    pub timing_marks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePlan {
    pub scene_id: SceneId,
    pub goal: String,
    pub goal_keywords: Vec<String>,
    pub narration_cues: Vec<String>,
    pub storyboard: Vec<String>,
    pub code_constraints: CodeConstraints,
    pub planned_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LessonPlan {
    pub brief: ConceptBrief,
    pub scenes: Vec<ScenePlan>,
    pub ledger: SymbolLedger,
    pub plan_version: String,
    pub seed: u64,
}

impl LessonPlan {
    pub fn scene(&self, id: SceneId) -> Option<&ScenePlan> {
        self.scenes.iter().find(|s| s.scene_id == id)
    }

    pub fn total_duration_s(&self) -> f64 {
        self.scenes.iter().map(|s| s.planned_duration_s).sum()
    }
}

/// Segmentation bounds. Scenes default to 60–120 s and the lesson total to
/// within ±20% of the brief's target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPolicy {
    pub min_scene_s: f64,
    pub max_scene_s: f64,
    pub total_tolerance: f64,
}

impl Default for SegmentPolicy {
    fn default() -> Self {
        Self {
            min_scene_s: 60.0,
            max_scene_s: 120.0,
            total_tolerance: 0.2,
        }
    }
}

impl SegmentPolicy {
    pub fn total_bounds(&self, target_s: f64) -> (f64, f64) {
        (target_s * (1.0 - self.total_tolerance), target_s * (1.0 + self.total_tolerance))
    }

    pub fn scene_in_bounds(&self, duration_s: f64) -> bool {
        duration_s >= self.min_scene_s && duration_s <= self.max_scene_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "defect", rename_all = "snake_case")]
pub enum PlanDefect {
    InvalidBrief { reason: String },
    NoScenes,
    SceneTooShort { scene_id: SceneId, duration_s: f64 },
    SceneTooLong { scene_id: SceneId, duration_s: f64 },
    TotalDurationDrift { total_s: f64, target_s: f64 },
    NonContiguousSceneIds { expected: SceneId, found: SceneId },
    EmptyGoal { scene_id: SceneId },
    NoGoalKeywords { scene_id: SceneId },
    NoAllowedPrimitives { scene_id: SceneId },
    /// A cue without a usable timing mark inside its scene.
    DanglingCue { scene_id: SceneId, cue_id: String },
    CueMultiplyOwned { cue_id: String },
    LedgerInconsistent { symbol: String, reason: String },
    /// Two proposed entries share a name but differ in meaning or dimension.
    DuplicateSymbol { symbol: String },
    /// The planner's answer could not be read as a plan.
    MalformedProposal { reason: String },
}

impl PlanDefect {
    pub fn from_ledger_error(err: &LedgerError, symbol: &str) -> Self {
        match err {
            LedgerError::DuplicateSymbol(name) => PlanDefect::DuplicateSymbol { symbol: name.clone() },
            other => PlanDefect::LedgerInconsistent { symbol: symbol.to_string(), reason: other.to_string() },
        }
    }
}

/// Checks a plan against the default [`SegmentPolicy`].
pub fn validate_plan(plan: &LessonPlan) -> Vec<PlanDefect> {
    validate_plan_with(plan, &SegmentPolicy::default())
}

pub fn validate_plan_with(plan: &LessonPlan, policy: &SegmentPolicy) -> Vec<PlanDefect> {
    let mut defects = Vec::new();
    if let Err(e) = plan.brief.check() {
        defects.push(PlanDefect::InvalidBrief { reason: e.to_string() });
    }
    if plan.scenes.is_empty() {
        defects.push(PlanDefect::NoScenes);
    }

    let mut cue_owners: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, scene) in plan.scenes.iter().enumerate() {
        let id = scene.scene_id;
        let expected = SceneId(i as u32 + 1);
        if id != expected {
            defects.push(PlanDefect::NonContiguousSceneIds { expected, found: id });
        }
        if scene.planned_duration_s < policy.min_scene_s {
            defects.push(PlanDefect::SceneTooShort { scene_id: id, duration_s: scene.planned_duration_s });
        } else if scene.planned_duration_s > policy.max_scene_s {
            defects.push(PlanDefect::SceneTooLong { scene_id: id, duration_s: scene.planned_duration_s });
        }
        if scene.goal.trim().is_empty() {
            defects.push(PlanDefect::EmptyGoal { scene_id: id });
        }
        if scene.goal_keywords.iter().all(|k| k.trim().is_empty()) {
            defects.push(PlanDefect::NoGoalKeywords { scene_id: id });
        }
        if scene.code_constraints.allowed_primitives.is_empty() {
            defects.push(PlanDefect::NoAllowedPrimitives { scene_id: id });
        }
        let marks = &scene.code_constraints.timing_marks;
        for (k, cue) in scene.narration_cues.iter().enumerate() {
            *cue_owners.entry(cue.as_str()).or_default() += 1;
            let usable = !cue.trim().is_empty()
                && marks
                    .get(k)
                    .is_some_and(|t| *t >= 0.0 && *t < scene.planned_duration_s);
            if !usable {
                defects.push(PlanDefect::DanglingCue { scene_id: id, cue_id: cue.clone() });
            }
        }
    }
    for (cue, owners) in cue_owners {
        if owners > 1 {
            defects.push(PlanDefect::CueMultiplyOwned { cue_id: cue.to_string() });
        }
    }

    if !plan.scenes.is_empty() {
        let total = plan.total_duration_s();
        let (lo, hi) = policy.total_bounds(plan.brief.target_duration_s);
        if total < lo || total > hi {
            defects.push(PlanDefect::TotalDurationDrift {
                total_s: total,
                target_s: plan.brief.target_duration_s,
            });
        }
    }

    let scene_ids: BTreeSet<SceneId> = plan.scenes.iter().map(|s| s.scene_id).collect();
    let mut seen = BTreeSet::new();
    for entry in plan.ledger.entries() {
        if !seen.insert(entry.name.as_str()) {
            defects.push(PlanDefect::LedgerInconsistent {
                symbol: entry.name.clone(),
                reason: "registered more than once".into(),
            });
        }
        if let Err(e) = check_entry(entry) {
            defects.push(PlanDefect::LedgerInconsistent { symbol: entry.name.clone(), reason: e.to_string() });
        }
        if !scene_ids.contains(&entry.introduced_in_scene) {
            defects.push(PlanDefect::LedgerInconsistent {
                symbol: entry.name.clone(),
                reason: format!("introduced in unknown scene {}", entry.introduced_in_scene),
            });
        }
    }
    defects
}
