//! On-disk project layout.
//!
//! ```text
//! brief.json  plan.json  manifest.json
//! artifacts/<scene>/<track>.vN.txt   (+ .vN.meta.json)
//! timelines/<scene>.json  validation/<scene>.json
//! out/  regression/  review/journal.jsonl
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::{DraftArtifact, Provenance, ScenePair, Track};
use crate::plan::{ConceptBrief, LessonPlan, SceneId};
use crate::sync::Timeline;
use crate::validation::ValidationReport;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0} is not a project directory (no plan.json or brief.json)")]
    NotAProject(PathBuf),
    #[error("no {track} artifact for scene {scene}")]
    MissingArtifact { scene: SceneId, track: Track },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io { path: path.to_path_buf(), source }
}

/// Pretty JSON with a trailing newline. Struct fields keep declaration
/// order and maps are `BTreeMap`s, so output is stable.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ArtifactMeta {
    scene_id: SceneId,
    track: Track,
    version: u32,
    provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct Project {
    root: PathBuf,
}

impl Project {
    /// Opens `root`, creating it if needed.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, ProjectError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root })
    }

    /// Opens an existing project.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ProjectError> {
        let root = root.into();
        if !root.join("plan.json").is_file() && !root.join("brief.json").is_file() {
            return Err(ProjectError::NotAProject(root));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn id(&self) -> String {
        self.root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "project".into())
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write_text(&self, rel: &str, text: &str) -> Result<(), ProjectError> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&path, text).map_err(io_err(&path))
    }

    pub fn read_text(&self, rel: &str) -> Result<String, ProjectError> {
        let path = self.path(rel);
        fs::read_to_string(&path).map_err(io_err(&path))
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), ProjectError> {
        self.write_text(rel, &to_json_pretty(value))
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T, ProjectError> {
        let text = self.read_text(rel)?;
        serde_json::from_str(&text).map_err(|source| ProjectError::Json { path: self.path(rel), source })
    }

    pub fn read_json_opt<T: DeserializeOwned>(&self, rel: &str) -> Result<Option<T>, ProjectError> {
        if self.path(rel).is_file() {
            self.read_json(rel).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn save_brief(&self, brief: &ConceptBrief) -> Result<(), ProjectError> {
        self.write_json("brief.json", brief)
    }

    pub fn load_brief(&self) -> Result<ConceptBrief, ProjectError> {
        self.read_json("brief.json")
    }

    pub fn save_plan(&self, plan: &LessonPlan) -> Result<(), ProjectError> {
        self.write_json("plan.json", plan)
    }

    pub fn load_plan(&self) -> Result<LessonPlan, ProjectError> {
        self.read_json("plan.json")
    }

    fn artifact_base(scene: SceneId, track: Track, version: u32) -> String {
        format!("artifacts/{scene}/{track}.v{version}")
    }

    /// Writes an artifact and its provenance. Existing versions are never
    /// overwritten with different content.
    pub fn save_artifact(&self, a: &DraftArtifact) -> Result<(), ProjectError> {
        let base = Self::artifact_base(a.scene_id, a.track, a.version);
        self.write_text(&format!("{base}.txt"), &a.content)?;
        let meta = ArtifactMeta {
            scene_id: a.scene_id,
            track: a.track,
            version: a.version,
            provenance: a.provenance.clone(),
        };
        self.write_json(&format!("{base}.meta.json"), &meta)
    }

    pub fn artifact_versions(&self, scene: SceneId, track: Track) -> Vec<u32> {
        let dir = self.path(&format!("artifacts/{scene}"));
        let prefix = format!("{track}.v");
        let mut out: Vec<u32> = fs::read_dir(dir)
            .into_iter()
            .flatten()
            .flatten()
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().into_owned();
                name.strip_prefix(&prefix)?.strip_suffix(".txt")?.parse().ok()
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn load_artifact(&self, scene: SceneId, track: Track, version: u32) -> Result<DraftArtifact, ProjectError> {
        let base = Self::artifact_base(scene, track, version);
        let content = self.read_text(&format!("{base}.txt"))?;
        let meta: ArtifactMeta = self.read_json(&format!("{base}.meta.json"))?;
        Ok(DraftArtifact { scene_id: scene, track, content, version: meta.version, provenance: meta.provenance })
    }

    pub fn latest_artifact(&self, scene: SceneId, track: Track) -> Result<Option<DraftArtifact>, ProjectError> {
        match self.artifact_versions(scene, track).last() {
            Some(v) => self.load_artifact(scene, track, *v).map(Some),
            None => Ok(None),
        }
    }

    pub fn latest_pair(&self, scene: SceneId) -> Result<ScenePair, ProjectError> {
        let get = |track| {
            self.latest_artifact(scene, track)?.ok_or(ProjectError::MissingArtifact { scene, track })
        };
        Ok(ScenePair { narration: get(Track::Narration)?, code: get(Track::Code)? })
    }

    /// Latest pair for every scene that has both tracks.
    pub fn latest_pairs(&self, plan: &LessonPlan) -> Result<BTreeMap<SceneId, ScenePair>, ProjectError> {
        let mut out = BTreeMap::new();
        for s in &plan.scenes {
            match self.latest_pair(s.scene_id) {
                Ok(p) => {
                    out.insert(s.scene_id, p);
                }
                Err(ProjectError::MissingArtifact { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    pub fn save_timeline(&self, t: &Timeline) -> Result<(), ProjectError> {
        self.write_json(&format!("timelines/{}.json", t.scene_id), t)
    }

    pub fn load_timeline(&self, scene: SceneId) -> Result<Option<Timeline>, ProjectError> {
        self.read_json_opt(&format!("timelines/{scene}.json"))
    }

    pub fn save_report(&self, r: &ValidationReport) -> Result<(), ProjectError> {
        self.write_json(&format!("validation/{}.json", r.scene_id), r)
    }

    pub fn load_report(&self, scene: SceneId) -> Result<Option<ValidationReport>, ProjectError> {
        self.read_json_opt(&format!("validation/{scene}.json"))
    }

    /// All files below the root as sorted relative paths with `/` separators.
    pub fn files(&self) -> Result<Vec<String>, ProjectError> {
        let mut out = Vec::new();
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
                let entry = entry.map_err(io_err(&dir))?;
                let p = entry.path();
                if p.is_dir() {
                    stack.push(p);
                } else if let Ok(rel) = p.strip_prefix(&self.root) {
                    let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
                    out.push(parts.join("/"));
                }
            }
        }
        out.sort();
        Ok(out)
    }
}
