//! Per-scene expert review: a three-criterion quick pass, the scene state
//! machine, and an append-only journal that is the source of truth for it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{Project, ProjectError};
use crate::generation::{regenerate_part, GenerationConfig, GenerationError, GeneratorBackend, TemplateSet, Track};
use crate::plan::{LessonPlan, SceneId};
use crate::validation::{route, Decision, ValidationReport};

pub const JOURNAL_PATH: &str = "review/journal.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    SubjectMatter,
    TeachingQuality,
    Engineering,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::SubjectMatter, Criterion::TeachingQuality, Criterion::Engineering];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pending,
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneState {
    Draft,
    Validated,
    InReview,
    ChangesRequested,
    Approved,
    Rendered,
}

impl fmt::Display for SceneState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SceneState::Draft => "draft",
            SceneState::Validated => "validated",
            SceneState::InReview => "in_review",
            SceneState::ChangesRequested => "changes_requested",
            SceneState::Approved => "approved",
            SceneState::Rendered => "rendered",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub scene_id: SceneId,
    pub criteria: BTreeMap<Criterion, Verdict>,
    pub reviewer_note: String,
    pub decided_at: Option<String>,
}

impl ReviewRecord {
    pub fn pending(scene_id: SceneId) -> Self {
        Self {
            scene_id,
            criteria: Criterion::ALL.iter().map(|c| (*c, Verdict::Pending)).collect(),
            reviewer_note: String::new(),
            decided_at: None,
        }
    }

    pub fn all_pass(&self) -> bool {
        Criterion::ALL.iter().all(|c| self.criteria.get(c) == Some(&Verdict::Pass))
    }

    pub fn any_fail(&self) -> bool {
        self.criteria.values().any(|v| *v == Verdict::Fail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: SceneId,
    pub state: SceneState,
    /// Bumped by every journaled change to this scene; write requests must
    /// quote the current value.
    pub version: u64,
    pub record: ReviewRecord,
}

/// One journal line's payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReviewEvent {
    /// Validation routed the scene to merge.
    Validated { scene_id: SceneId },
    /// Automatic repair ran out of attempts; a human takes over.
    Escalated { scene_id: SceneId },
    Submitted { scene_id: SceneId },
    VerdictRecorded { scene_id: SceneId, criterion: Criterion, verdict: Verdict, note: String },
    RegenerationRequested { scene_id: SceneId, track: Track, note: String },
    /// A new artifact version landed. Always resets the scene to draft.
    ArtifactChanged { scene_id: SceneId, track: Track, version: u32 },
    Rendered { scene_id: SceneId },
}

impl ReviewEvent {
    pub fn scene_id(&self) -> SceneId {
        match self {
            ReviewEvent::Validated { scene_id }
            | ReviewEvent::Escalated { scene_id }
            | ReviewEvent::Submitted { scene_id }
            | ReviewEvent::VerdictRecorded { scene_id, .. }
            | ReviewEvent::RegenerationRequested { scene_id, .. }
            | ReviewEvent::ArtifactChanged { scene_id, .. }
            | ReviewEvent::Rendered { scene_id } => *scene_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub at: String,
    pub event: ReviewEvent,
}

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: SceneState, to: SceneState },
    #[error("a fail verdict or regeneration request needs a reviewer note")]
    MissingNote,
    #[error("unknown scene {0}")]
    UnknownScene(SceneId),
    #[error("unknown project `{0}`")]
    UnknownProject(String),
    #[error("scene {0} was not routed to merge at its current artifact versions")]
    NotRoutedToMerge(SceneId),
    #[error("version conflict: request has {given}, scene is at {current}")]
    VersionConflict { given: u64, current: u64 },
    #[error("review journal corrupt at line {position}: {reason}")]
    StoreCorrupt { position: usize, reason: String },
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

/// Scene states for one project. Pure: `apply` either applies an event or
/// leaves the book untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewBook {
    pub scenes: BTreeMap<SceneId, SceneEntry>,
}

impl ReviewBook {
    pub fn new(scene_ids: impl IntoIterator<Item = SceneId>) -> Self {
        let scenes = scene_ids
            .into_iter()
            .map(|id| (id, SceneEntry { scene_id: id, state: SceneState::Draft, version: 0, record: ReviewRecord::pending(id) }))
            .collect();
        Self { scenes }
    }

    pub fn for_plan(plan: &LessonPlan) -> Self {
        Self::new(plan.scenes.iter().map(|s| s.scene_id))
    }

    pub fn get(&self, id: SceneId) -> Option<&SceneEntry> {
        self.scenes.get(&id)
    }

    pub fn apply(&mut self, event: &ReviewEvent, at: &str) -> Result<(), ReviewError> {
        use SceneState::*;
        let id = event.scene_id();
        let entry = self.scenes.get_mut(&id).ok_or(ReviewError::UnknownScene(id))?;
        let from = entry.state;
        let illegal = |to| Err(ReviewError::IllegalTransition { from, to });
        match event {
            ReviewEvent::Validated { .. } => {
                if from != Draft {
                    return illegal(Validated);
                }
                entry.state = Validated;
            }
            ReviewEvent::Escalated { .. } => {
                if from != Draft {
                    return illegal(InReview);
                }
                entry.state = InReview;
            }
            ReviewEvent::Submitted { .. } => {
                if from != Validated {
                    return illegal(InReview);
                }
                entry.state = InReview;
            }
            ReviewEvent::VerdictRecorded { criterion, verdict, note, .. } => {
                if from != InReview {
                    return illegal(InReview);
                }
                if *verdict == Verdict::Fail && note.trim().is_empty() {
                    return Err(ReviewError::MissingNote);
                }
                entry.record.criteria.insert(*criterion, *verdict);
                if !note.trim().is_empty() {
                    entry.record.reviewer_note = note.clone();
                }
                entry.record.decided_at = Some(at.to_string());
                if entry.record.all_pass() {
                    entry.state = Approved;
                }
            }
            ReviewEvent::RegenerationRequested { note, .. } => {
                if from != InReview && from != ChangesRequested {
                    return illegal(ChangesRequested);
                }
                if note.trim().is_empty() {
                    return Err(ReviewError::MissingNote);
                }
                entry.state = ChangesRequested;
            }
            ReviewEvent::ArtifactChanged { .. } => {
                entry.state = Draft;
                entry.record = ReviewRecord::pending(id);
            }
            ReviewEvent::Rendered { .. } => {
                if from != Approved && from != Rendered {
                    return illegal(Rendered);
                }
                entry.state = Rendered;
            }
        }
        entry.version += 1;
        Ok(())
    }
}

/// Replays journal text onto a fresh book for `plan`.
pub fn replay(plan_scenes: &ReviewBook, journal: &str) -> Result<ReviewBook, ReviewError> {
    let mut book = plan_scenes.clone();
    for (i, line) in journal.lines().enumerate() {
        let position = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| ReviewError::StoreCorrupt { position, reason };
        let entry: JournalEntry = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
        if entry.seq != position as u64 {
            return Err(corrupt(format!("sequence number {} out of order", entry.seq)));
        }
        book.apply(&entry.event, &entry.at).map_err(|e| corrupt(e.to_string()))?;
    }
    Ok(book)
}

struct Writer {
    next_seq: u64,
}

/// Review state of one project. Mutations go through a single writer lock
/// and hit the journal before the in-memory snapshot is replaced; readers
/// clone the current snapshot.
pub struct ProjectReview {
    project: Project,
    plan: LessonPlan,
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<ReviewBook>>,
}

impl ProjectReview {
    pub fn open(project: Project) -> Result<Self, ReviewError> {
        let plan = project.load_plan()?;
        let path = project.path(JOURNAL_PATH);
        let text = if path.is_file() { project.read_text(JOURNAL_PATH)? } else { String::new() };
        let book = replay(&ReviewBook::for_plan(&plan), &text)?;
        let next_seq = text.lines().filter(|l| !l.trim().is_empty()).count() as u64 + 1;
        Ok(Self { project, plan, writer: Mutex::new(Writer { next_seq }), snapshot: RwLock::new(Arc::new(book)) })
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn plan(&self) -> &LessonPlan {
        &self.plan
    }

    pub fn snapshot(&self) -> Arc<ReviewBook> {
        self.snapshot.read().clone()
    }

    fn commit(&self, writer: &mut Writer, event: ReviewEvent, expected: Option<u64>) -> Result<SceneEntry, ReviewError> {
        let id = event.scene_id();
        let mut book = (*self.snapshot()).clone();
        let current = book.get(id).ok_or(ReviewError::UnknownScene(id))?.version;
        if let Some(given) = expected {
            if given != current {
                return Err(ReviewError::VersionConflict { given, current });
            }
        }
        let at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        book.apply(&event, &at)?;
        let entry = JournalEntry { seq: writer.next_seq, at, event };
        append_line(&self.project.path(JOURNAL_PATH), &serde_json::to_string(&entry).expect("serializable"))?;
        writer.next_seq += 1;
        let out = book.get(id).cloned().expect("scene present");
        *self.snapshot.write() = Arc::new(book);
        Ok(out)
    }

    pub fn mark_validated(
        &self,
        report: &ValidationReport,
        max_attempts: u32,
    ) -> Result<SceneEntry, ReviewError> {
        let pair = self.project.latest_pair(report.scene_id)?;
        let current = report.checked_versions.narration == pair.narration.version
            && report.checked_versions.code == pair.code.version;
        if !current || route(report, max_attempts) != Decision::Merge {
            return Err(ReviewError::NotRoutedToMerge(report.scene_id));
        }
        self.commit(&mut self.writer.lock(), ReviewEvent::Validated { scene_id: report.scene_id }, None)
    }

    pub fn escalate(&self, scene_id: SceneId) -> Result<SceneEntry, ReviewError> {
        self.commit(&mut self.writer.lock(), ReviewEvent::Escalated { scene_id }, None)
    }

    pub fn submit(&self, scene_id: SceneId, version: Option<u64>) -> Result<SceneEntry, ReviewError> {
        self.commit(&mut self.writer.lock(), ReviewEvent::Submitted { scene_id }, version)
    }

    pub fn record_verdict(
        &self,
        scene_id: SceneId,
        criterion: Criterion,
        verdict: Verdict,
        note: &str,
        version: Option<u64>,
    ) -> Result<SceneEntry, ReviewError> {
        let event = ReviewEvent::VerdictRecorded { scene_id, criterion, verdict, note: note.to_string() };
        self.commit(&mut self.writer.lock(), event, version)
    }

    pub fn artifact_changed(&self, scene_id: SceneId, track: Track, version: u32) -> Result<SceneEntry, ReviewError> {
        self.commit(&mut self.writer.lock(), ReviewEvent::ArtifactChanged { scene_id, track, version }, None)
    }

    pub fn mark_rendered(&self, scene_id: SceneId) -> Result<SceneEntry, ReviewError> {
        self.commit(&mut self.writer.lock(), ReviewEvent::Rendered { scene_id }, None)
    }

    /// Moves the scene to changes_requested, regenerates `track` with the
    /// note as repair context, saves the new version and resets the scene
    /// to draft. The writer lock is held throughout, so the regeneration is
    /// serialized with every other write to this project.
    pub fn request_regeneration(
        &self,
        scene_id: SceneId,
        track: Track,
        note: &str,
        version: Option<u64>,
        backend: &dyn GeneratorBackend,
        templates: &TemplateSet,
        config: &GenerationConfig,
    ) -> Result<SceneEntry, ReviewError> {
        let mut writer = self.writer.lock();
        let event = ReviewEvent::RegenerationRequested { scene_id, track, note: note.to_string() };
        self.commit(&mut writer, event, version)?;
        let prior = self
            .project
            .latest_artifact(scene_id, track)?
            .ok_or(ProjectError::MissingArtifact { scene: scene_id, track })?;
        let next = regenerate_part(&self.plan, &prior, note, backend, templates, config)?;
        self.project.save_artifact(&next)?;
        self.commit(&mut writer, ReviewEvent::ArtifactChanged { scene_id, track, version: next.version }, None)
    }
}

fn append_line(path: &Path, line: &str) -> Result<(), ProjectError> {
    let io = |source| ProjectError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    writeln!(f, "{line}").map_err(io)?;
    f.sync_data().map_err(io)
}

/// Every project directory (one with a `plan.json`) directly below `root`.
pub struct ProjectStore {
    root: PathBuf,
    projects: BTreeMap<String, Arc<ProjectReview>>,
}

impl ProjectStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ReviewError> {
        let root = root.into();
        let mut projects = BTreeMap::new();
        let mut candidates = vec![root.clone()];
        if let Ok(rd) = fs::read_dir(&root) {
            candidates.extend(rd.flatten().map(|e| e.path()).filter(|p| p.is_dir()));
        }
        for dir in candidates {
            if dir.join("plan.json").is_file() {
                let review = ProjectReview::open(Project::open(&dir)?)?;
                projects.insert(review.project().id(), Arc::new(review));
            }
        }
        Ok(Self { root, projects })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ids(&self) -> Vec<String> {
        self.projects.keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Result<Arc<ProjectReview>, ReviewError> {
        self.projects.get(id).cloned().ok_or_else(|| ReviewError::UnknownProject(id.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book() -> ReviewBook {
        ReviewBook::new([SceneId(1)])
    }

    fn ev(kind: &str) -> ReviewEvent {
        let s = SceneId(1);
        match kind {
            "validate" => ReviewEvent::Validated { scene_id: s },
            "submit" => ReviewEvent::Submitted { scene_id: s },
            "render" => ReviewEvent::Rendered { scene_id: s },
            _ => unreachable!(),
        }
    }

    fn verdict(c: Criterion, v: Verdict, note: &str) -> ReviewEvent {
        ReviewEvent::VerdictRecorded { scene_id: SceneId(1), criterion: c, verdict: v, note: note.into() }
    }

    #[test]
    fn three_passes_approve() {
        let mut b = book();
        b.apply(&ev("validate"), "t").unwrap();
        b.apply(&ev("submit"), "t").unwrap();
        assert_eq!(b.get(SceneId(1)).unwrap().state, SceneState::InReview);
        for c in Criterion::ALL {
            b.apply(&verdict(c, Verdict::Pass, ""), "t").unwrap();
        }
        assert_eq!(b.get(SceneId(1)).unwrap().state, SceneState::Approved);
        b.apply(&ev("render"), "t").unwrap();
        assert_eq!(b.get(SceneId(1)).unwrap().version, 6);
    }

    #[test]
    fn fail_needs_note_and_render_needs_review() {
        let mut b = book();
        assert!(matches!(
            b.apply(&ev("render"), "t"),
            Err(ReviewError::IllegalTransition { from: SceneState::Draft, to: SceneState::Rendered })
        ));
        b.apply(&ev("validate"), "t").unwrap();
        b.apply(&ev("submit"), "t").unwrap();
        let before = b.clone();
        assert!(matches!(b.apply(&verdict(Criterion::Engineering, Verdict::Fail, " "), "t"), Err(ReviewError::MissingNote)));
        assert_eq!(b, before);
    }

    #[test]
    fn artifact_change_after_approval_resets() {
        let mut b = book();
        b.apply(&ev("validate"), "t").unwrap();
        b.apply(&ev("submit"), "t").unwrap();
        for c in Criterion::ALL {
            b.apply(&verdict(c, Verdict::Pass, ""), "t").unwrap();
        }
        b.apply(&ReviewEvent::ArtifactChanged { scene_id: SceneId(1), track: Track::Code, version: 2 }, "t").unwrap();
        let e = b.get(SceneId(1)).unwrap();
        assert_eq!(e.state, SceneState::Draft);
        assert_eq!(e.record, ReviewRecord::pending(SceneId(1)));
    }

    #[test]
    fn replay_flags_bad_lines() {
        let base = book();
        let good = serde_json::to_string(&JournalEntry { seq: 1, at: "t".into(), event: ev("validate") }).unwrap();
        assert_eq!(replay(&base, &good).unwrap().get(SceneId(1)).unwrap().state, SceneState::Validated);
        let text = format!("{good}\n{{not json\n");
        assert!(matches!(replay(&base, &text), Err(ReviewError::StoreCorrupt { position: 2, .. })));
        let illegal = serde_json::to_string(&JournalEntry { seq: 2, at: "t".into(), event: ev("render") }).unwrap();
        assert!(matches!(replay(&base, &format!("{good}\n{illegal}\n")), Err(ReviewError::StoreCorrupt { position: 2, .. })));
    }
}
