//! Merging validated scenes into deliverables: scene scripts, a narration
//! file with absolute times, WebVTT captions, renders and the manifest.

mod manifest;
mod project;
pub mod regression;

pub use manifest::{manifest_digests, verify_manifest, write_manifest, BuildManifest, MANIFEST_EXCLUDES};
pub use project::{to_json_pretty, Project, ProjectError};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{sha256_hex, EngineError, EngineInfo, RenderEngine};
use crate::generation::ScenePair;
use crate::plan::{LessonPlan, SceneId};
use crate::script::format_seconds;
use crate::sync::Timeline;
use crate::validation::{route, Decision, ValidationReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("scene {0} has not been routed to merge")]
    UnmergedScene(SceneId),
    #[error("cue `{cue_id}` does not start after the cue before it")]
    OverlappingCues { cue_id: String },
    #[error("render of scene {scene_id} failed: {diagnostic}")]
    EngineFailure { scene_id: SceneId, diagnostic: String },
}

/// A cue placed on the lesson-wide clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteCue {
    pub cue_id: String,
    pub scene_id: SceneId,
    pub text: String,
    pub start_s: f64,
    pub est_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedBundle {
    /// `(scene number, script)` in scene order.
    pub scripts: Vec<(u32, String)>,
    pub cues: Vec<AbsoluteCue>,
    pub narration: String,
    pub captions: String,
}

/// Merges scenes that validation routed to merge. Scene offsets accumulate
/// planned durations.
pub fn merge_project(
    plan: &LessonPlan,
    pairs: &BTreeMap<SceneId, ScenePair>,
    timelines: &BTreeMap<SceneId, Timeline>,
    reports: &BTreeMap<SceneId, ValidationReport>,
    max_attempts: u32,
) -> Result<MergedBundle, AssemblyError> {
    let mut scripts = Vec::new();
    let mut cues = Vec::new();
    let mut offset = 0.0;
    for scene in &plan.scenes {
        let sid = scene.scene_id;
        let merged = reports.get(&sid).is_some_and(|r| {
            route(r, max_attempts) == Decision::Merge
                && pairs.get(&sid).is_some_and(|p| {
                    r.checked_versions.narration == p.narration.version && r.checked_versions.code == p.code.version
                })
        });
        let (Some(pair), Some(t), true) = (pairs.get(&sid), timelines.get(&sid), merged) else {
            return Err(AssemblyError::UnmergedScene(sid));
        };
        scripts.push((sid.0, pair.code.content.clone()));
        for c in &t.cues {
            cues.push(AbsoluteCue {
                cue_id: c.cue_id.clone(),
                scene_id: sid,
                text: c.text.clone(),
                start_s: round_ms(offset + c.start_s),
                est_duration_s: c.est_duration_s,
            });
        }
        offset += scene.planned_duration_s;
    }
    let captions = emit_captions(&cues)?;
    let narration = narration_file(&cues);
    Ok(MergedBundle { scripts, cues, narration, captions })
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn narration_file(cues: &[AbsoluteCue]) -> String {
    let mut out = String::new();
    let mut scene = None;
    for c in cues {
        if scene != Some(c.scene_id) {
            if scene.is_some() {
                out.push('\n');
            }
            let _ = writeln!(out, "# scene {}", c.scene_id);
            scene = Some(c.scene_id);
        }
        let _ = writeln!(out, "[[cue:{} @ {}]] {}", c.cue_id, format_seconds(c.start_s), c.text);
    }
    out
}

/// `HH:MM:SS.mmm`.
pub fn vtt_timestamp(t: f64) -> String {
    let ms = (t * 1000.0).round().max(0.0) as u64;
    format!("{:02}:{:02}:{:02}.{:03}", ms / 3_600_000, ms / 60_000 % 60, ms / 1000 % 60, ms % 1000)
}

/// One WebVTT block per cue, ending at the earlier of its estimated end and
/// the next cue's start.
pub fn emit_captions(cues: &[AbsoluteCue]) -> Result<String, AssemblyError> {
    let mut out = String::from("WEBVTT\n");
    for (i, c) in cues.iter().enumerate() {
        let next = cues.get(i + 1);
        if let Some(n) = next {
            if n.start_s <= c.start_s {
                return Err(AssemblyError::OverlappingCues { cue_id: n.cue_id.clone() });
            }
        }
        let mut end = c.start_s + c.est_duration_s;
        if let Some(n) = next {
            end = end.min(n.start_s);
        }
        let text = c.text.replace('$', "");
        let _ = write!(out, "\n{}\n{} --> {}\n{}\n", c.cue_id, vtt_timestamp(c.start_s), vtt_timestamp(end), text);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneDigest {
    pub scene: u32,
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderResult {
    pub engine: EngineInfo,
    pub seed: u64,
    pub scenes: Vec<SceneDigest>,
    /// Digest over the per-scene digests in scene order.
    pub digest: String,
}

/// Renders every scene (concurrently) and combines the digests in scene order.
pub fn render(
    bundle: &MergedBundle,
    engine: &dyn RenderEngine,
    seed: u64,
    out_dir: &Path,
) -> Result<RenderResult, AssemblyError> {
    let results: Vec<Result<SceneDigest, AssemblyError>> = std::thread::scope(|s| {
        let handles: Vec<_> = bundle
            .scripts
            .iter()
            .map(|(n, script)| {
                s.spawn(move || {
                    engine
                        .render_scene(*n, script, seed, out_dir)
                        .map(|r| SceneDigest {
                            scene: *n,
                            digest: r.digest,
                            video: r.video.map(|p| p.to_string_lossy().into_owned()),
                        })
                        .map_err(|e| AssemblyError::EngineFailure {
                            scene_id: SceneId(*n),
                            diagnostic: match e {
                                EngineError::RuntimeFault { line, diagnostic } => format!("line {line}: {diagnostic}"),
                                other => other.to_string(),
                            },
                        })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("render thread")).collect()
    });
    let scenes = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut combined = String::new();
    for s in &scenes {
        let _ = writeln!(combined, "{}:{}", s.scene, s.digest);
    }
    Ok(RenderResult { engine: engine.info(), seed, digest: sha256_hex(combined.as_bytes()), scenes })
}

/// Writes the bundle under `out/`.
pub fn write_bundle(project: &Project, bundle: &MergedBundle) -> Result<(), ProjectError> {
    for (n, script) in &bundle.scripts {
        project.write_text(&format!("out/scene_{n}.py"), script)?;
    }
    project.write_text("out/narration.txt", &bundle.narration)?;
    project.write_text("out/captions.vtt", &bundle.captions)
}
