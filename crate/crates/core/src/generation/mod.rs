//! Generator backends and the plan / parallel drafting / part-regeneration
//! workflow.
//!
//! Narration and code are two independent tracks per scene. They are drafted
//! concurrently, merged back in `(scene_id, track)` order, and a failing
//! track is regenerated without touching its sibling.

mod canned;
mod remote;
mod template;

pub use canned::TemplateBackend;
pub use remote::{RemoteBackend, RemoteConfig};
pub use template::{
    render_prompt, DecodeParams, PromptTemplate, TemplateError, TemplateKind, TemplateSet, MAX_CODE_TEMPERATURE,
    PLAN_SLOTS, SCENE_SLOTS,
};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::{
    validate_plan_with, CodeConstraints, ConceptBrief, LessonPlan, PlanDefect, SceneId, ScenePlan, SegmentPolicy,
    SymbolEntry, SymbolLedger,
};
use crate::script::format_seconds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    Narration,
    Code,
}

impl Track {
    pub const BOTH: [Track; 2] = [Track::Narration, Track::Code];

    pub fn as_str(self) -> &'static str {
        match self {
            Track::Narration => "narration",
            Track::Code => "code",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "narration" => Some(Track::Narration),
            "code" => Some(Track::Code),
            _ => None,
        }
    }

    pub fn sibling(self) -> Track {
        match self {
            Track::Narration => Track::Code,
            Track::Code => Track::Narration,
        }
    }

    pub fn template_kind(self) -> TemplateKind {
        match self {
            Track::Narration => TemplateKind::Narration,
            Track::Code => TemplateKind::Code,
        }
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub backend_id: String,
    pub model_id: String,
    pub template_id: String,
    pub template_version: String,
    pub seed: u64,
    pub attempt: u32,
}

impl Provenance {
    pub fn is_complete(&self) -> bool {
        !self.backend_id.is_empty()
            && !self.model_id.is_empty()
            && !self.template_id.is_empty()
            && !self.template_version.is_empty()
            && self.attempt >= 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftArtifact {
    pub scene_id: SceneId,
    pub track: Track,
    pub content: String,
    pub version: u32,
    pub provenance: Provenance,
}

impl DraftArtifact {
    /// Same draft with new content, one version later. Provenance is kept:
    /// the edit is mechanical, not a new generation.
    pub fn revised(&self, content: String) -> DraftArtifact {
        DraftArtifact { content, version: self.version + 1, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub scene_id: SceneId,
    pub track: Track,
    pub template: PromptTemplate,
    pub slot_values: BTreeMap<String, String>,
    pub seed: u64,
    pub attempt: u32,
}

/// Everything a backend sees for one completion.
#[derive(Debug, Clone, Copy)]
pub struct BackendCall<'a> {
    pub template: &'a PromptTemplate,
    pub slot_values: &'a BTreeMap<String, String>,
    pub prompt: &'a str,
    pub seed: u64,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// Model that actually served the call, as echoed by the backend.
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend does not support {0:?} templates")]
    Unsupported(TemplateKind),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("{0}")]
    Other(String),
}

/// A source of completions. The template backend is deterministic in
/// `(template, slot_values, seed)`; remote backends only echo provenance.
pub trait GeneratorBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn capabilities(&self) -> &[TemplateKind];
    /// Concurrent calls the backend tolerates; `1` forces serial drafting.
    fn max_parallelism(&self) -> usize {
        usize::MAX
    }
    fn complete(&self, call: &BackendCall<'_>) -> Result<Completion, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub max_attempts: u32,
    /// Worker threads for drafting; the backend's own limit also applies.
    pub parallelism: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { max_attempts: 3, parallelism: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error("backend failure{}: {source}", scene.map(|(s, t)| format!(" on scene {s} {t}")).unwrap_or_default())]
    BackendFailure { scene: Option<(SceneId, Track)>, source: BackendError },
    #[error("plan rejected after {attempts} attempt(s): {defects:?}")]
    PlanRejected { attempts: u32, defects: Vec<PlanDefect> },
    #[error("scene {scene_id} {track}: attempt {attempt} exceeds the limit of {max_attempts}")]
    MaxAttemptsExceeded { scene_id: SceneId, track: Track, attempt: u32, max_attempts: u32 },
    #[error("scene {0} is not in the plan")]
    UnknownScene(SceneId),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid brief: {0}")]
    InvalidBrief(String),
}

/// Backend output for the planning call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanProposal {
    pub scenes: Vec<SceneProposal>,
    #[serde(default)]
    pub symbols: Vec<SymbolProposal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneProposal {
    pub goal: String,
    pub goal_keywords: Vec<String>,
    /// One frame per narration cue.
    pub storyboard: Vec<String>,
    pub allowed_primitives: Vec<String>,
    #[serde(default)]
    pub layout_hints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolProposal {
    pub name: String,
    pub meaning: String,
    pub unit_expr: String,
    #[serde(default)]
    pub assumptions: Vec<String>,
    pub introduced_in_scene: u32,
}

/// `round(target / 90)`, at least two scenes.
pub fn scene_count_for(target_duration_s: f64) -> usize {
    ((target_duration_s / 90.0).round() as usize).max(2)
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Splits the target evenly at 0.1 s resolution; the last scene absorbs the
/// rounding remainder.
pub fn split_durations(target_duration_s: f64, scenes: usize) -> Vec<f64> {
    let each = round1(target_duration_s / scenes as f64);
    let mut out = vec![each; scenes];
    if let Some(last) = out.last_mut() {
        *last = round1(target_duration_s - each * (scenes - 1) as f64);
    }
    out
}

/// Evenly spaced cue starts within a scene.
pub fn timing_marks(duration_s: f64, cues: usize) -> Vec<f64> {
    (0..cues).map(|k| round1(k as f64 * duration_s / cues as f64)).collect()
}

pub fn cue_id(scene: SceneId, k: usize) -> String {
    format!("s{}c{}", scene.0, k + 1)
}

fn plan_slots(brief: &ConceptBrief, scenes: usize, repair_context: &str) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("topic".into(), brief.topic_title.clone());
    m.insert("audience".into(), brief.audience_level.as_str().into());
    m.insert("objective".into(), brief.learning_objective.clone());
    m.insert("target_duration_s".into(), format_seconds(brief.target_duration_s));
    m.insert("scene_count".into(), scenes.to_string());
    m.insert("notes".into(), brief.notes.clone().unwrap_or_default());
    m.insert("repair_context".into(), repair_context.into());
    m
}

fn assemble_plan(
    brief: &ConceptBrief,
    proposal: PlanProposal,
    scene_count: usize,
    plan_version: &str,
    seed: u64,
) -> Result<LessonPlan, Vec<PlanDefect>> {
    if proposal.scenes.len() != scene_count {
        return Err(vec![PlanDefect::MalformedProposal {
            reason: format!("expected {scene_count} scenes, got {}", proposal.scenes.len()),
        }]);
    }
    let durations = split_durations(brief.target_duration_s, scene_count);
    let scenes: Vec<ScenePlan> = proposal
        .scenes
        .into_iter()
        .zip(durations)
        .enumerate()
        .map(|(i, (sp, duration))| {
            let id = SceneId(i as u32 + 1);
            let cues = sp.storyboard.len();
            ScenePlan {
                scene_id: id,
                goal: sp.goal,
                goal_keywords: sp.goal_keywords,
                narration_cues: (0..cues).map(|k| cue_id(id, k)).collect(),
                storyboard: sp.storyboard,
                code_constraints: CodeConstraints {
                    allowed_primitives: sp.allowed_primitives,
                    layout_hints: sp.layout_hints,
                    timing_marks: timing_marks(duration, cues),
                },
                planned_duration_s: duration,
            }
        })
        .collect();

    let mut defects = Vec::new();
    let mut ledger = SymbolLedger::new();
    for sym in proposal.symbols {
        let entry = SymbolEntry::new(sym.name.clone(), sym.meaning, sym.unit_expr, SceneId(sym.introduced_in_scene))
            .map(|e| SymbolEntry { assumptions: sym.assumptions, ..e });
        match entry {
            Ok(e) => {
                if let Err(err) = ledger.register(e) {
                    defects.push(PlanDefect::from_ledger_error(&err, &sym.name));
                }
            }
            Err(err) => defects.push(PlanDefect::LedgerInconsistent { symbol: sym.name, reason: err.to_string() }),
        }
    }
    let plan = LessonPlan {
        brief: brief.clone(),
        scenes,
        ledger,
        plan_version: plan_version.to_string(),
        seed,
    };
    defects.extend(validate_plan_with(&plan, &SegmentPolicy::default()));
    if defects.is_empty() {
        Ok(plan)
    } else {
        Err(defects)
    }
}

/// Plans a lesson from a brief, retrying with the defects as repair context
/// until the plan validates or `max_attempts` is spent.
pub fn build_plan(
    brief: &ConceptBrief,
    backend: &dyn GeneratorBackend,
    templates: &TemplateSet,
    seed: u64,
    config: &GenerationConfig,
) -> Result<LessonPlan, GenerationError> {
    brief.check().map_err(|e| GenerationError::InvalidBrief(e.to_string()))?;
    if !backend.capabilities().contains(&TemplateKind::Plan) {
        return Err(GenerationError::BackendFailure {
            scene: None,
            source: BackendError::Unsupported(TemplateKind::Plan),
        });
    }
    let scene_count = scene_count_for(brief.target_duration_s);
    let mut repair_context = String::new();
    let mut last_defects = Vec::new();
    for attempt in 1..=config.max_attempts.max(1) {
        let slots = plan_slots(brief, scene_count, &repair_context);
        let prompt = render_prompt(&templates.plan, &slots)?;
        let completion = backend
            .complete(&BackendCall { template: &templates.plan, slot_values: &slots, prompt: &prompt, seed, attempt })
            .map_err(|source| GenerationError::BackendFailure { scene: None, source })?;
        let defects = match serde_json::from_str::<PlanProposal>(extract_json(&completion.text)) {
            Ok(proposal) => match assemble_plan(brief, proposal, scene_count, &templates.plan.version, seed) {
                Ok(plan) => return Ok(plan),
                Err(d) => d,
            },
            Err(e) => vec![PlanDefect::MalformedProposal { reason: e.to_string() }],
        };
        repair_context = format!(
            "The previous plan was rejected: {}",
            serde_json::to_string(&defects).unwrap_or_default()
        );
        last_defects = defects;
    }
    Err(GenerationError::PlanRejected { attempts: config.max_attempts.max(1), defects: last_defects })
}

/// Strips a Markdown code fence if the model wrapped its JSON in one.
fn extract_json(text: &str) -> &str {
    let t = text.trim();
    match (t.find('{'), t.rfind('}')) {
        (Some(a), Some(b)) if a < b => &t[a..=b],
        _ => t,
    }
}

fn scene_slots(plan: &LessonPlan, scene: &ScenePlan, repair_context: &str) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("topic".into(), plan.brief.topic_title.clone());
    m.insert("audience".into(), plan.brief.audience_level.as_str().into());
    m.insert("scene_id".into(), scene.scene_id.to_string());
    m.insert("goal".into(), scene.goal.clone());
    m.insert("goal_keywords".into(), scene.goal_keywords.join(", "));
    let cue_plan: Vec<String> = scene
        .narration_cues
        .iter()
        .zip(&scene.code_constraints.timing_marks)
        .map(|(c, t)| format!("{c} @ {}", format_seconds(*t)))
        .collect();
    m.insert("cue_plan".into(), cue_plan.join("\n"));
    let frames: Vec<String> = scene.storyboard.iter().map(|f| format!("- {f}")).collect();
    m.insert("storyboard".into(), frames.join("\n"));
    let symbols: Vec<String> = plan
        .ledger
        .entries()
        .iter()
        .map(|e| format!("{} | {} | {}", e.name, e.meaning, e.unit_expr))
        .collect();
    m.insert("symbols".into(), symbols.join("\n"));
    m.insert("allowed_primitives".into(), scene.code_constraints.allowed_primitives.join(", "));
    m.insert("layout_hints".into(), scene.code_constraints.layout_hints.join("; "));
    m.insert("planned_duration_s".into(), format_seconds(scene.planned_duration_s));
    m.insert("repair_context".into(), repair_context.into());
    m
}

pub fn request_for(
    plan: &LessonPlan,
    scene: &ScenePlan,
    track: Track,
    templates: &TemplateSet,
    attempt: u32,
    repair_context: &str,
) -> GenerationRequest {
    GenerationRequest {
        scene_id: scene.scene_id,
        track,
        template: templates.for_kind(track.template_kind()).clone(),
        slot_values: scene_slots(plan, scene, repair_context),
        seed: plan.seed,
        attempt,
    }
}

/// Runs one generation request and wraps the result as an artifact.
pub fn generate(
    request: &GenerationRequest,
    backend: &dyn GeneratorBackend,
    version: u32,
) -> Result<DraftArtifact, GenerationError> {
    let failure = |source| GenerationError::BackendFailure { scene: Some((request.scene_id, request.track)), source };
    if !backend.capabilities().contains(&request.template.kind) {
        return Err(failure(BackendError::Unsupported(request.template.kind)));
    }
    let prompt = render_prompt(&request.template, &request.slot_values)?;
    let completion = backend
        .complete(&BackendCall {
            template: &request.template,
            slot_values: &request.slot_values,
            prompt: &prompt,
            seed: request.seed,
            attempt: request.attempt,
        })
        .map_err(failure)?;
    if completion.text.trim().is_empty() {
        return Err(failure(BackendError::Malformed("empty completion".into())));
    }
    Ok(DraftArtifact {
        scene_id: request.scene_id,
        track: request.track,
        content: completion.text,
        version,
        provenance: Provenance {
            backend_id: backend.backend_id().to_string(),
            model_id: completion.model_id,
            template_id: request.template.template_id.clone(),
            template_version: request.template.version.clone(),
            seed: request.seed,
            attempt: request.attempt,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenePair {
    pub narration: DraftArtifact,
    pub code: DraftArtifact,
}

impl ScenePair {
    pub fn get(&self, track: Track) -> &DraftArtifact {
        match track {
            Track::Narration => &self.narration,
            Track::Code => &self.code,
        }
    }

    pub fn set(&mut self, artifact: DraftArtifact) {
        match artifact.track {
            Track::Narration => self.narration = artifact,
            Track::Code => self.code = artifact,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DraftFailure {
    pub scene_id: SceneId,
    pub track: Track,
    pub error: GenerationError,
}

/// Result of drafting every track of every scene.
#[derive(Debug, Clone, Default)]
pub struct DraftSet {
    /// Delivered artifacts in `(scene_id, track)` order.
    pub artifacts: BTreeMap<(SceneId, Track), DraftArtifact>,
    pub failures: Vec<DraftFailure>,
}

impl DraftSet {
    /// Scenes with both tracks delivered.
    pub fn pairs(&self) -> BTreeMap<SceneId, ScenePair> {
        let mut out = BTreeMap::new();
        for ((scene, track), art) in &self.artifacts {
            if *track == Track::Narration {
                if let Some(code) = self.artifacts.get(&(*scene, Track::Code)) {
                    out.insert(*scene, ScenePair { narration: art.clone(), code: code.clone() });
                }
            }
        }
        out
    }
}

/// Drafts narration and code for every scene concurrently. A failure on one
/// `(scene, track)` is recorded and does not affect the others.
pub fn draft_tracks(
    plan: &LessonPlan,
    backend: &dyn GeneratorBackend,
    templates: &TemplateSet,
    config: &GenerationConfig,
) -> DraftSet {
    let jobs: Vec<GenerationRequest> = plan
        .scenes
        .iter()
        .flat_map(|scene| Track::BOTH.map(|track| request_for(plan, scene, track, templates, 1, "")))
        .collect();
    let workers = config.parallelism.max(1).min(backend.max_parallelism().max(1)).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<DraftArtifact, GenerationError>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let out = generate(job, backend, 1);
                results.lock().expect("draft results lock").push((i, out));
            });
        }
    });
    let mut results = results.into_inner().expect("draft results lock");
    results.sort_by_key(|(i, _)| *i);
    let mut set = DraftSet::default();
    for (i, result) in results {
        let job = &jobs[i];
        match result {
            Ok(a) => {
                set.artifacts.insert((job.scene_id, job.track), a);
            }
            Err(error) => set.failures.push(DraftFailure { scene_id: job.scene_id, track: job.track, error }),
        }
    }
    set
}

/// Regenerates one track of one scene with `repair_context` injected into
/// the template's repair slot. The sibling track is not touched.
pub fn regenerate_part(
    plan: &LessonPlan,
    prior: &DraftArtifact,
    repair_context: &str,
    backend: &dyn GeneratorBackend,
    templates: &TemplateSet,
    config: &GenerationConfig,
) -> Result<DraftArtifact, GenerationError> {
    let attempt = prior.provenance.attempt + 1;
    if attempt > config.max_attempts {
        return Err(GenerationError::MaxAttemptsExceeded {
            scene_id: prior.scene_id,
            track: prior.track,
            attempt,
            max_attempts: config.max_attempts,
        });
    }
    let scene = plan.scene(prior.scene_id).ok_or(GenerationError::UnknownScene(prior.scene_id))?;
    let request = request_for(plan, scene, prior.track, templates, attempt, repair_context);
    generate(&request, backend, prior.version + 1)
}

