use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

use scenesmith_core::assembly::Project;
use scenesmith_core::engine::StubEngine;
use scenesmith_core::generation::{build_plan, draft_tracks, GenerationConfig, TemplateBackend, TemplateSet};
use scenesmith_core::plan::{AudienceLevel, ConceptBrief};
use scenesmith_core::review::{ProjectReview, ProjectStore};
use scenesmith_core::validation::{validate_scene, ValidationConfig};
use scenesmith_server::{bind, serve, AppState, Regenerator, ServeError};

/// A drafted and validated project; every scene starts out `validated`.
fn fixture(dir: &Path) {
    let brief = ConceptBrief {
        topic_title: "Eigenvalues".into(),
        audience_level: AudienceLevel::Intermediate,
        learning_objective: "see the key idea".into(),
        target_duration_s: 180.0,
        notes: None,
    };
    let backend = TemplateBackend::new();
    let templates = TemplateSet::builtin();
    let gen = GenerationConfig::default();
    let plan = build_plan(&brief, &backend, &templates, 7, &gen).unwrap();
    let project = Project::create(dir).unwrap();
    project.save_brief(&brief).unwrap();
    project.save_plan(&plan).unwrap();
    let drafts = draft_tracks(&plan, &backend, &templates, &gen);
    for a in drafts.artifacts.values() {
        project.save_artifact(a).unwrap();
    }
    let review = ProjectReview::open(project).unwrap();
    for (sid, pair) in drafts.pairs() {
        let (report, timeline) =
            validate_scene(&plan, plan.scene(sid).unwrap(), &pair, &StubEngine::new(), &ValidationConfig::default())
                .unwrap();
        review.project().save_timeline(&timeline.unwrap()).unwrap();
        review.project().save_report(&report).unwrap();
        review.mark_validated(&report, gen.max_attempts).unwrap();
    }
}

async fn start(root: &Path) -> (String, Client) {
    let state = AppState {
        store: Arc::new(ProjectStore::open(root).unwrap()),
        regen: Arc::new(Regenerator {
            backend: Arc::new(TemplateBackend::new()),
            templates: TemplateSet::builtin(),
            config: GenerationConfig::default(),
        }),
    };
    let listener = bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, state));
    (format!("http://{addr}"), Client::new())
}

async fn get(c: &Client, url: String) -> (StatusCode, Value) {
    let r = c.get(url).send().await.unwrap();
    (r.status(), r.json().await.unwrap_or(Value::Null))
}

async fn post(c: &Client, url: String, body: Value) -> (StatusCode, Value) {
    let r = c.post(url).json(&body).send().await.unwrap();
    (r.status(), r.json().await.unwrap_or(Value::Null))
}

#[tokio::test]
async fn empty_store_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (base, c) = start(dir.path()).await;
    let (status, body) = get(&c, format!("{base}/projects")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([]));
    assert_eq!(get(&c, format!("{base}/projects/nope/scenes")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn listing_and_detail() {
    let dir = tempfile::tempdir().unwrap();
    fixture(&dir.path().join("eigen"));
    let (base, c) = start(dir.path()).await;
    let (_, projects) = get(&c, format!("{base}/projects")).await;
    assert_eq!(projects[0]["id"], "eigen");
    assert_eq!(projects[0]["topic"], "Eigenvalues");
    let (_, scenes) = get(&c, format!("{base}/projects/eigen/scenes")).await;
    let scenes = scenes.as_array().unwrap();
    assert!(scenes.len() >= 2);
    assert!(scenes.iter().all(|s| s["state"] == "validated" && s["version"] == 1));

    let (status, d) = get(&c, format!("{base}/projects/eigen/scenes/1")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["state"], "validated");
    assert_eq!(d["record"]["criteria"]["engineering"], "pending");
    assert_eq!(d["artifacts"]["code_versions"], json!([1]));
    assert!(d["artifacts"]["code"]["content"].as_str().unwrap().contains("class "));
    assert!(d["timeline"]["bindings"].as_array().unwrap().len() >= 1);
    assert_eq!(d["validation"]["passed"], true);

    assert_eq!(get(&c, format!("{base}/projects/eigen/scenes/99")).await.0, StatusCode::NOT_FOUND);
    let (status, body) = get(&c, format!("{base}/projects/eigen/manifest")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "no_manifest");
}

#[tokio::test]
async fn review_to_approval_and_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let (base, c) = start(dir.path()).await;
    let scene = format!("{base}/projects/{}/scenes/1", dir.path().file_name().unwrap().to_string_lossy());

    // Verdicts before submission are illegal.
    let (status, body) =
        post(&c, format!("{scene}/verdict"), json!({"criterion": "engineering", "verdict": "pass", "version": 1})).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("illegal_transition")));

    let (status, e) = post(&c, format!("{scene}/submit"), json!({"version": 1})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((e["state"].as_str(), e["version"].as_u64()), (Some("in_review"), Some(2)));

    let (status, body) = post(
        &c,
        format!("{scene}/verdict"),
        json!({"criterion": "engineering", "verdict": "fail", "note": "  ", "version": 2}),
    )
    .await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("missing_note")));

    let (status, body) =
        post(&c, format!("{scene}/verdict"), json!({"criterion": "engineering", "verdict": "pass", "version": 1})).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("version_conflict")));

    let (status, _) = post(&c, format!("{scene}/verdict"), json!({"criterion": "style", "verdict": "pass", "version": 2})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let mut version = 2;
    for criterion in ["subject_matter", "teaching_quality", "engineering"] {
        let (status, e) = post(
            &c,
            format!("{scene}/verdict"),
            json!({"criterion": criterion, "verdict": "pass", "version": version}),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{e}");
        version = e["version"].as_u64().unwrap();
    }
    let (_, d) = get(&c, scene.clone()).await;
    assert_eq!(d["state"], "approved");
    assert_eq!(d["version"], 5);
}

#[tokio::test]
async fn concurrent_conflicting_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    fixture(&dir.path().join("p"));
    let (base, c) = start(dir.path()).await;
    let scene = format!("{base}/projects/p/scenes/2");
    assert_eq!(post(&c, format!("{scene}/submit"), Value::Null).await.0, StatusCode::OK);
    for round in 0..5 {
        let version = 2 + round;
        let a = post(&c, format!("{scene}/verdict"), json!({"criterion": "engineering", "verdict": "pass", "version": version}));
        let b = post(
            &c,
            format!("{scene}/verdict"),
            json!({"criterion": "subject_matter", "verdict": "fail", "note": "wrong sign", "version": version}),
        );
        let ((sa, _), (sb, _)) = tokio::join!(a, b);
        let mut statuses = [sa, sb];
        statuses.sort();
        assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT], "round {round}");
    }
    let (_, d) = get(&c, scene).await;
    assert_eq!(d["version"], 7);
    let journal = std::fs::read_to_string(dir.path().join("p/review/journal.jsonl")).unwrap();
    let scene_two = journal.lines().filter(|l| l.contains("\"scene_id\":2")).count();
    assert_eq!(scene_two, 7);
}

#[tokio::test]
async fn fail_then_regenerate_code() {
    let dir = tempfile::tempdir().unwrap();
    fixture(&dir.path().join("p"));
    let (base, c) = start(dir.path()).await;
    let scene = format!("{base}/projects/p/scenes/1");
    post(&c, format!("{scene}/submit"), json!({})).await;
    let (status, e) = post(
        &c,
        format!("{scene}/verdict"),
        json!({"criterion": "engineering", "verdict": "fail", "note": "labels overlap", "version": 2}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(e["state"], "in_review");

    let (status, body) = post(&c, format!("{scene}/regenerate"), json!({"track": "code", "note": "", "version": 3})).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("missing_note")));

    let (status, e) =
        post(&c, format!("{scene}/regenerate"), json!({"track": "code", "note": "labels overlap", "version": 3})).await;
    assert_eq!(status, StatusCode::OK, "{e}");
    assert_eq!(e["state"], "draft");
    let (_, d) = get(&c, scene).await;
    assert_eq!(d["artifacts"]["code_versions"], json!([1, 2]));
    assert_eq!(d["artifacts"]["narration_versions"], json!([1]));
    assert!(d["artifacts"]["code"]["content"].as_str().unwrap().contains("labels overlap"));
    assert_eq!(d["record"]["criteria"]["engineering"], "pending");
}

#[tokio::test]
async fn occupied_port_is_reported() {
    let first = bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
    let addr = first.local_addr().unwrap();
    match bind(addr).await {
        Err(ServeError::PortInUse(p)) => assert_eq!(p, addr.port()),
        other => panic!("{other:?}"),
    }
}
