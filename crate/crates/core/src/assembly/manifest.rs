use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::project::{Project, ProjectError};
use crate::engine::{sha256_hex, EngineInfo};
use crate::generation::Track;

/// Paths left out of the digest map: the manifest itself and the review
/// journal, which keeps growing after the build.
pub const MANIFEST_EXCLUDES: &[&str] = &["manifest.json", "review/"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildManifest {
    pub project_id: String,
    pub model_id: String,
    pub prompt_versions: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub engine_id: String,
    pub engine_version: String,
    pub latex_version: String,
    /// `path -> sha256`, paths relative to the project root.
    pub artifact_digests: BTreeMap<String, String>,
    pub created_at: String,
}

impl BuildManifest {
    /// Copy with the timestamp blanked, for comparisons.
    pub fn without_timestamp(&self) -> Self {
        Self { created_at: String::new(), ..self.clone() }
    }
}

fn excluded(path: &str) -> bool {
    MANIFEST_EXCLUDES.iter().any(|x| if x.ends_with('/') { path.starts_with(x) } else { path == *x })
}

pub fn manifest_digests(project: &Project) -> Result<BTreeMap<String, String>, ProjectError> {
    let mut out = BTreeMap::new();
    for rel in project.files()? {
        if excluded(&rel) {
            continue;
        }
        let path = project.path(&rel);
        let bytes = std::fs::read(&path).map_err(|source| ProjectError::Io { path, source })?;
        out.insert(rel, sha256_hex(&bytes));
    }
    Ok(out)
}

/// Builds and writes `manifest.json`. Model ids, prompt versions and seeds
/// come from the plan and from the provenance of the latest artifacts.
pub fn write_manifest(project: &Project, engine: &EngineInfo, created_at: &str) -> Result<BuildManifest, ProjectError> {
    let plan = project.load_plan()?;
    let mut models = BTreeSet::new();
    let mut prompts = BTreeMap::new();
    let mut seeds = BTreeSet::from([plan.seed]);
    prompts.insert("plan".to_string(), plan.plan_version.clone());
    for scene in &plan.scenes {
        for track in Track::BOTH {
            if let Some(a) = project.latest_artifact(scene.scene_id, track)? {
                models.insert(a.provenance.model_id.clone());
                prompts.insert(a.provenance.template_id.clone(), a.provenance.template_version.clone());
                seeds.insert(a.provenance.seed);
            }
        }
    }
    let manifest = BuildManifest {
        project_id: project.id(),
        model_id: models.into_iter().collect::<Vec<_>>().join(","),
        prompt_versions: prompts,
        seeds: seeds.into_iter().collect(),
        engine_id: engine.engine_id.clone(),
        engine_version: engine.version.clone(),
        latex_version: engine.latex_version.clone(),
        artifact_digests: manifest_digests(project)?,
        created_at: created_at.to_string(),
    };
    project.write_json("manifest.json", &manifest)?;
    Ok(manifest)
}

/// True iff every digest matches the current files and no file is missing
/// from the manifest.
pub fn verify_manifest(project: &Project, manifest: &BuildManifest) -> Result<bool, ProjectError> {
    Ok(manifest_digests(project)? == manifest.artifact_digests)
}
