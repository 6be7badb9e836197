// Shared by the core review tests and the cli acceptance suite.

use std::path::Path;

use scenesmith_core::assembly::Project;
use scenesmith_core::engine::StubEngine;
use scenesmith_core::generation::{build_plan, draft_tracks, GenerationConfig, TemplateBackend, TemplateSet, Track};
use scenesmith_core::plan::{AudienceLevel, ConceptBrief, SceneId};
use scenesmith_core::review::{Criterion, ProjectReview, ReviewBook, ReviewEvent, SceneState, Verdict};
use scenesmith_core::validation::{validate_scene, ValidationConfig};

pub const SCENE: SceneId = SceneId(1);

/// Every event the API can produce for one scene, including ones that must
/// be rejected (fail or regeneration without a note).
pub fn alphabet() -> Vec<ReviewEvent> {
    let s = SCENE;
    let mut out = vec![
        ReviewEvent::Validated { scene_id: s },
        ReviewEvent::Escalated { scene_id: s },
        ReviewEvent::Submitted { scene_id: s },
    ];
    for c in Criterion::ALL {
        out.push(ReviewEvent::VerdictRecorded { scene_id: s, criterion: c, verdict: Verdict::Pass, note: String::new() });
        out.push(ReviewEvent::VerdictRecorded { scene_id: s, criterion: c, verdict: Verdict::Fail, note: "fix".into() });
    }
    out.push(ReviewEvent::VerdictRecorded {
        scene_id: s,
        criterion: Criterion::Engineering,
        verdict: Verdict::Fail,
        note: String::new(),
    });
    out.push(ReviewEvent::RegenerationRequested { scene_id: s, track: Track::Code, note: "redo".into() });
    out.push(ReviewEvent::RegenerationRequested { scene_id: s, track: Track::Narration, note: String::new() });
    out.push(ReviewEvent::ArtifactChanged { scene_id: s, track: Track::Code, version: 2 });
    out.push(ReviewEvent::Rendered { scene_id: s });
    out
}

#[derive(Debug, Default)]
pub struct ModelStats {
    pub sequences: u64,
    pub rendered_reached: u64,
    pub violations: Vec<String>,
}

fn check(book: &ReviewBook, trace: &[usize], stats: &mut ModelStats) {
    let e = book.get(SCENE).unwrap();
    let three_passes = e.record.all_pass();
    let approved_like = matches!(e.state, SceneState::Approved | SceneState::Rendered);
    if approved_like != three_passes {
        stats.violations.push(format!("{trace:?}: state {} with passes={three_passes}", e.state));
    }
    if e.record.any_fail() && e.record.reviewer_note.trim().is_empty() {
        stats.violations.push(format!("{trace:?}: fail without note"));
    }
}

/// Applies every sequence of up to `depth` events (rejected events leave the
/// book unchanged) and checks that rendered is reachable only with an
/// approved record carrying three passes.
pub fn exhaustive(depth: usize) -> ModelStats {
    let alphabet = alphabet();
    let mut stats = ModelStats::default();
    let mut trace = Vec::with_capacity(depth);
    walk(&ReviewBook::new([SCENE]), &alphabet, depth, &mut trace, &mut stats);
    stats
}

fn walk(book: &ReviewBook, alphabet: &[ReviewEvent], depth: usize, trace: &mut Vec<usize>, stats: &mut ModelStats) {
    stats.sequences += 1;
    check(book, trace, stats);
    if book.get(SCENE).unwrap().state == SceneState::Rendered {
        stats.rendered_reached += 1;
    }
    if trace.len() == depth {
        return;
    }
    for (i, ev) in alphabet.iter().enumerate() {
        let mut next = book.clone();
        if next.apply(ev, "t").is_err() {
            assert_eq!(&next, book, "rejected event mutated the book");
        }
        trace.push(i);
        walk(&next, alphabet, depth, trace, stats);
        trace.pop();
    }
}

/// Writes a small drafted project (plan, brief, v1 artifacts) into `dir`.
pub fn fixture_project(dir: &Path) -> ProjectReview {
    let brief = ConceptBrief {
        topic_title: "Eigenvalues".into(),
        audience_level: AudienceLevel::Intermediate,
        learning_objective: "see the key idea".into(),
        target_duration_s: 180.0,
        notes: None,
    };
    let backend = TemplateBackend::new();
    let templates = TemplateSet::builtin();
    let plan = build_plan(&brief, &backend, &templates, 7, &GenerationConfig::default()).unwrap();
    let project = Project::create(dir).unwrap();
    project.save_brief(&brief).unwrap();
    project.save_plan(&plan).unwrap();
    for a in draft_tracks(&plan, &backend, &templates, &GenerationConfig::default()).artifacts.values() {
        project.save_artifact(a).unwrap();
    }
    ProjectReview::open(project).unwrap()
}

/// A store-level call, decoded from four small integers so both proptest
/// and a seeded RNG can produce them.
#[derive(Debug, Clone, Copy)]
pub enum Op {
    Validate(u32),
    Escalate(u32),
    Submit { scene: u32, stale: bool },
    Verdict { scene: u32, criterion: Criterion, pass: bool, note: bool, stale: bool },
    Regenerate { scene: u32, track: Track, note: bool },
    Render(u32),
}

impl Op {
    pub fn decode(kind: u8, scene: u8, a: u8, b: u8, scenes: u32) -> Op {
        let scene = 1 + u32::from(scene) % scenes;
        match kind % 8 {
            0 => Op::Validate(scene),
            1 => Op::Escalate(scene),
            2 => Op::Submit { scene, stale: a % 5 == 0 },
            3 | 4 => Op::Verdict {
                scene,
                criterion: Criterion::ALL[usize::from(a) % 3],
                pass: b % 3 != 0,
                note: b % 4 != 1,
                stale: a % 7 == 0,
            },
            5 => Op::Regenerate { scene, track: if a % 2 == 0 { Track::Code } else { Track::Narration }, note: b % 5 != 0 },
            _ => Op::Render(scene),
        }
    }
}

/// Runs `ops` against `review`, ignoring rejected calls.
pub fn run_ops(review: &ProjectReview, ops: &[Op]) {
    let engine = StubEngine::new();
    let backend = TemplateBackend::new();
    let templates = TemplateSet::builtin();
    let gen = GenerationConfig::default();
    let config = ValidationConfig::default();
    for op in ops {
        let version = |scene: u32, stale: bool| {
            let v = review.snapshot().get(SceneId(scene)).unwrap().version;
            Some(if stale { v + 1 } else { v })
        };
        let _ = match *op {
            Op::Validate(s) => {
                let plan = review.plan();
                let scene = plan.scene(SceneId(s)).unwrap();
                let pair = review.project().latest_pair(SceneId(s)).unwrap();
                let (report, _) = validate_scene(plan, scene, &pair, &engine, &config).unwrap();
                review.mark_validated(&report, config.max_attempts)
            }
            Op::Escalate(s) => review.escalate(SceneId(s)),
            Op::Submit { scene, stale } => review.submit(SceneId(scene), version(scene, stale)),
            Op::Verdict { scene, criterion, pass, note, stale } => review.record_verdict(
                SceneId(scene),
                criterion,
                if pass { Verdict::Pass } else { Verdict::Fail },
                if note { "looks off" } else { "" },
                version(scene, stale),
            ),
            Op::Regenerate { scene, track, note } => review.request_regeneration(
                SceneId(scene),
                track,
                if note { "tighten the pacing" } else { "" },
                version(scene, false),
                &backend,
                &templates,
                &gen,
            ),
            Op::Render(s) => review.mark_rendered(SceneId(s)),
        };
    }
}

/// Runs `ops`, then reopens the project from disk and compares.
pub fn replay_matches(dir: &Path, ops: &[Op]) -> Result<(), String> {
    let review = fixture_project(dir);
    run_ops(&review, ops);
    let live = review.snapshot();
    let reopened = ProjectReview::open(Project::open(dir).unwrap()).map_err(|e| e.to_string())?;
    if *reopened.snapshot() != *live {
        return Err(format!("replayed state differs after {ops:?}"));
    }
    let lines = review.project().read_text(scenesmith_core::review::JOURNAL_PATH).unwrap_or_default().lines().count() as u64;
    let versions: u64 = live.scenes.values().map(|e| e.version).sum();
    if lines != versions {
        return Err(format!("{lines} journal lines but versions sum to {versions}"));
    }
    Ok(())
}
