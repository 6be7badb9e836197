//! Curated regression scenes: regenerate fixed inputs and compare their
//! trace digest and timeline with a blessed baseline.
//!
//! This is an automated proxy for comparing outputs by eye; reports say so.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::project::{Project, ProjectError};
use crate::engine::{EngineError, RenderEngine};
use crate::generation::{
    build_plan, generate, request_for, GenerationConfig, GenerationError, GeneratorBackend, TemplateSet, Track,
};
use crate::plan::{ConceptBrief, SceneId};
use crate::sync::{extract_timeline, SyncError, Timeline};

/// Timing changes at or below this many seconds are noise.
pub const DEVIATION_THRESHOLD_S: f64 = 0.25;

pub const METHOD_NOTE: &str =
    "automated trace and timeline comparison; a proxy for reviewing regenerated scenes by eye";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionCase {
    pub name: String,
    pub brief: ConceptBrief,
    pub seed: u64,
    pub scene_id: SceneId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub trace_digest: String,
    pub timeline: Timeline,
    pub template_versions: BTreeMap<String, String>,
}

/// A case together with its baseline, if blessed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionScene {
    pub case: RegressionCase,
    pub baseline: Option<Baseline>,
}

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("regression case `{0}` has no baseline; bless it first")]
    MissingBaseline(String),
    #[error("case `{case}`: {source}")]
    Generation { case: String, source: GenerationError },
    #[error("case `{case}`: {source}")]
    Timeline { case: String, source: SyncError },
    #[error("case `{case}`: {source}")]
    Engine { case: String, source: EngineError },
    #[error("case `{0}`: scene is not in the regenerated plan")]
    UnknownScene(String),
    #[error(transparent)]
    Project(#[from] ProjectError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Deviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseVerdict {
    pub case: String,
    pub verdict: Verdict,
    pub digest_changed: bool,
    pub structure_changed: bool,
    pub max_timing_delta_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub method: String,
    pub threshold_s: f64,
    pub verdicts: Vec<CaseVerdict>,
}

impl RegressionReport {
    pub fn deviations(&self) -> usize {
        self.verdicts.iter().filter(|v| v.verdict == Verdict::Deviation).count()
    }
}

/// Regenerates one case from scratch.
pub fn run_case(
    case: &RegressionCase,
    backend: &dyn GeneratorBackend,
    templates: &TemplateSet,
    engine: &dyn RenderEngine,
) -> Result<Baseline, RegressionError> {
    let gen_err = |source| RegressionError::Generation { case: case.name.clone(), source };
    let plan = build_plan(&case.brief, backend, templates, case.seed, &GenerationConfig::default()).map_err(gen_err)?;
    let scene = plan.scene(case.scene_id).ok_or_else(|| RegressionError::UnknownScene(case.name.clone()))?;
    let narration = generate(&request_for(&plan, scene, Track::Narration, templates, 1, ""), backend, 1).map_err(gen_err)?;
    let code = generate(&request_for(&plan, scene, Track::Code, templates, 1, ""), backend, 1).map_err(gen_err)?;
    let timeline = extract_timeline(&narration, &code, scene)
        .map_err(|source| RegressionError::Timeline { case: case.name.clone(), source })?;
    let run = engine
        .dry_run(&code.content, case.seed, engine.default_budget())
        .map_err(|source| RegressionError::Engine { case: case.name.clone(), source })?;
    Ok(Baseline { trace_digest: run.digest(), timeline, template_versions: templates.versions() })
}

/// Largest timing change between two timelines, and whether their cue,
/// event or binding sets differ.
pub fn timeline_delta(old: &Timeline, new: &Timeline) -> (bool, f64) {
    let ids = |t: &Timeline| {
        (
            t.cues.iter().map(|c| c.cue_id.clone()).collect::<BTreeSet<_>>(),
            t.events.iter().map(|e| e.event_id.clone()).collect::<BTreeSet<_>>(),
            t.bindings.iter().cloned().collect::<BTreeSet<_>>(),
        )
    };
    let structure_changed = old.events.len() != new.events.len() || ids(old) != ids(new);
    let mut delta: f64 = 0.0;
    for c in &old.cues {
        if let Some(n) = new.cue(&c.cue_id) {
            delta = delta.max((n.start_s - c.start_s).abs());
        }
    }
    for e in &old.events {
        if let Some(n) = new.event(&e.event_id) {
            delta = delta.max((n.start_s - e.start_s).abs());
        }
    }
    for b in &old.bindings {
        let drift = |t: &Timeline| Some(t.event(&b.event_id)?.start_s - t.cue(&b.cue_id)?.start_s);
        if let (Some(a), Some(n)) = (drift(old), drift(new)) {
            delta = delta.max((n - a).abs());
        }
    }
    (structure_changed, delta)
}

pub fn compare(case: &str, baseline: &Baseline, current: &Baseline) -> CaseVerdict {
    let digest_changed = baseline.trace_digest != current.trace_digest;
    let (structure_changed, max_timing_delta_s) = timeline_delta(&baseline.timeline, &current.timeline);
    let significant = structure_changed || max_timing_delta_s > DEVIATION_THRESHOLD_S;
    CaseVerdict {
        case: case.to_string(),
        verdict: if digest_changed && significant { Verdict::Deviation } else { Verdict::Match },
        digest_changed,
        structure_changed,
        max_timing_delta_s,
    }
}

pub fn regression_run(
    suite: &[RegressionScene],
    backend: &dyn GeneratorBackend,
    templates: &TemplateSet,
    engine: &dyn RenderEngine,
) -> Result<RegressionReport, RegressionError> {
    let mut verdicts = Vec::new();
    for scene in suite {
        let baseline = scene.baseline.as_ref().ok_or_else(|| RegressionError::MissingBaseline(scene.case.name.clone()))?;
        let current = run_case(&scene.case, backend, templates, engine)?;
        verdicts.push(compare(&scene.case.name, baseline, &current));
    }
    Ok(RegressionReport { method: METHOD_NOTE.into(), threshold_s: DEVIATION_THRESHOLD_S, verdicts })
}

/// The only way a baseline gets written.
pub fn bless(
    case: &RegressionCase,
    backend: &dyn GeneratorBackend,
    templates: &TemplateSet,
    engine: &dyn RenderEngine,
) -> Result<RegressionScene, RegressionError> {
    let baseline = run_case(case, backend, templates, engine)?;
    Ok(RegressionScene { case: case.clone(), baseline: Some(baseline) })
}

/// Loads `regression/<case>/{case.json, baseline.json}` in name order.
pub fn load_suite(project: &Project) -> Result<Vec<RegressionScene>, RegressionError> {
    let dir = project.path("regression");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.path().join("case.json").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            Ok(RegressionScene {
                case: project.read_json(&format!("regression/{n}/case.json"))?,
                baseline: project.read_json_opt(&format!("regression/{n}/baseline.json"))?,
            })
        })
        .collect()
}

pub fn save_scene(project: &Project, scene: &RegressionScene) -> Result<(), ProjectError> {
    let dir = format!("regression/{}", scene.case.name);
    project.write_json(&format!("{dir}/case.json"), &scene.case)?;
    if let Some(b) = &scene.baseline {
        project.write_json(&format!("{dir}/baseline.json"), b)?;
    }
    Ok(())
}

/// One case per scene of the project's plan.
pub fn cases_from_plan(project: &Project) -> Result<Vec<RegressionCase>, ProjectError> {
    let plan = project.load_plan()?;
    Ok(plan
        .scenes
        .iter()
        .map(|s| RegressionCase {
            name: format!("scene_{}", s.scene_id),
            brief: plan.brief.clone(),
            seed: plan.seed,
            scene_id: s.scene_id,
        })
        .collect())
}
