mod support;

use proptest::prelude::*;
use scenesmith_core::generation::Track;
use scenesmith_core::plan::SceneId;
use scenesmith_core::review::{Criterion, ReviewError, SceneState, Verdict};
use support::review_model::{exhaustive, fixture_project, replay_matches, Op};

#[test]
fn rendered_only_after_three_passes() {
    let stats = exhaustive(6);
    assert!(stats.violations.is_empty(), "{:#?}", &stats.violations[..stats.violations.len().min(5)]);
    // Validate, submit, three passes, render is the shortest route.
    assert!(stats.rendered_reached > 0);
}

#[test]
fn fail_then_regenerate_lands_new_code_version() {
    let dir = tempfile::tempdir().unwrap();
    let review = fixture_project(dir.path());
    let s = SceneId(1);
    let pair = review.project().latest_pair(s).unwrap();
    let (report, _) = scenesmith_core::validation::validate_scene(
        review.plan(),
        review.plan().scene(s).unwrap(),
        &pair,
        &scenesmith_core::engine::StubEngine::new(),
        &Default::default(),
    )
    .unwrap();
    review.mark_validated(&report, 3).unwrap();
    let e = review.submit(s, Some(1)).unwrap();
    assert_eq!(e.state, SceneState::InReview);
    assert!(matches!(
        review.record_verdict(s, Criterion::Engineering, Verdict::Fail, "", Some(2)),
        Err(ReviewError::MissingNote)
    ));
    assert!(matches!(
        review.record_verdict(s, Criterion::Engineering, Verdict::Fail, "labels overlap", Some(1)),
        Err(ReviewError::VersionConflict { given: 1, current: 2 })
    ));
    review.record_verdict(s, Criterion::Engineering, Verdict::Fail, "labels overlap", Some(2)).unwrap();
    let e = review
        .request_regeneration(
            s,
            Track::Code,
            "labels overlap",
            Some(3),
            &scenesmith_core::generation::TemplateBackend::new(),
            &scenesmith_core::generation::TemplateSet::builtin(),
            &Default::default(),
        )
        .unwrap();
    assert_eq!(e.state, SceneState::Draft);
    assert_eq!(review.project().latest_artifact(s, Track::Code).unwrap().unwrap().version, 2);
    assert_eq!(review.project().latest_artifact(s, Track::Narration).unwrap().unwrap().version, 1);
}

#[test]
fn corrupt_journal_is_reported_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let review = fixture_project(dir.path());
    review.escalate(SceneId(1)).unwrap();
    let path = review.project().path(scenesmith_core::review::JOURNAL_PATH);
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"seq\":2,\"at\":\"t\",\"event\":{\"kind\":\"rendered\",\"scene_id\":1}}\n");
    std::fs::write(&path, text).unwrap();
    let err = scenesmith_core::review::ProjectReview::open(review.project().clone()).err().unwrap();
    assert!(matches!(err, ReviewError::StoreCorrupt { position: 2, .. }), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn journal_replay_reproduces_state(codes in prop::collection::vec((0u8..8, 0u8..4, any::<u8>(), any::<u8>()), 0..30)) {
        let dir = tempfile::tempdir().unwrap();
        let ops: Vec<Op> = codes.iter().map(|&(k, s, a, b)| Op::decode(k, s, a, b, 2)).collect();
        prop_assert_eq!(replay_matches(dir.path(), &ops), Ok(()));
    }
}
