//! The authoring stages: plan, draft, validate, assemble and regress. Each
//! reads and writes the project directory so a reviewer can step in
//! between stages.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;

use scenesmith_core::assembly::regression::{
    bless, cases_from_plan, load_suite, regression_run, save_scene, RegressionError, Verdict,
};
use scenesmith_core::assembly::{
    merge_project, render, write_bundle, write_manifest, AssemblyError, Project,
};
use scenesmith_core::engine::{select_engine, RenderEngine};
use scenesmith_core::generation::{build_plan, draft_tracks, GenerationError, TemplateSet};
use scenesmith_core::plan::{ConceptBrief, LessonPlan};
use scenesmith_core::review::{ProjectReview, ReviewError, SceneState};
use scenesmith_core::validation::{repair_once, route, validate_scene, Decision, RepairError, RepairOutcome, ValidationConfig};

use crate::config::CliConfig;
use crate::exit::{fail, CmdResult, Code, Failure, WithCode};

fn open_project(root: &Path) -> Result<(Project, LessonPlan), Failure> {
    let project = Project::open(root).code(Code::Usage)?;
    let plan = project.load_plan().context("no plan found; run `scenesmith plan` first").code(Code::Usage)?;
    Ok((project, plan))
}

fn generation_code(e: &GenerationError) -> Code {
    match e {
        GenerationError::InvalidBrief(_) | GenerationError::UnknownScene(_) => Code::Usage,
        GenerationError::PlanRejected { .. } | GenerationError::MaxAttemptsExceeded { .. } => Code::Invalid,
        GenerationError::BackendFailure { .. } | GenerationError::Template(_) => Code::Backend,
    }
}

fn review_code(e: &ReviewError) -> Code {
    match e {
        ReviewError::StoreCorrupt { .. } | ReviewError::NotRoutedToMerge(_) => Code::Invalid,
        ReviewError::Generation(g) => generation_code(g),
        _ => Code::Usage,
    }
}

fn review_err(e: ReviewError) -> Failure {
    Failure { code: review_code(&e), error: e.into() }
}

/// Reads a brief from JSON, or TOML when the extension says so.
pub fn read_brief(path: &Path) -> anyhow::Result<ConceptBrief> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn cmd_plan(cfg: &CliConfig, brief_path: &Path) -> CmdResult {
    let brief = read_brief(brief_path).code(Code::Usage)?;
    let backend = cfg.make_backend().code(Code::Usage)?;
    let plan = build_plan(&brief, backend.as_ref(), &TemplateSet::builtin(), cfg.seed, &cfg.generation)
        .map_err(|e| Failure { code: generation_code(&e), error: e.into() })?;
    let project = Project::create(&cfg.root).code(Code::Usage)?;
    project.save_brief(&brief).code(Code::Usage)?;
    project.save_plan(&plan).code(Code::Usage)?;
    println!(
        "planned {} scenes, {:.0} s of {:.0} s target, seed {}",
        plan.scenes.len(),
        plan.total_duration_s(),
        brief.target_duration_s,
        plan.seed
    );
    for s in &plan.scenes {
        println!("  scene {} ({:.0} s): {}", s.scene_id, s.planned_duration_s, s.goal);
    }
    Ok(Code::Ok)
}

pub fn cmd_draft(cfg: &CliConfig) -> CmdResult {
    let (project, plan) = open_project(&cfg.root)?;
    let backend = cfg.make_backend().code(Code::Usage)?;
    let drafts = draft_tracks(&plan, backend.as_ref(), &TemplateSet::builtin(), &cfg.generation);
    for a in drafts.artifacts.values() {
        project.save_artifact(a).code(Code::Usage)?;
    }
    println!("drafted {} artifacts", drafts.artifacts.len());
    if drafts.failures.is_empty() {
        return Ok(Code::Ok);
    }
    for f in &drafts.failures {
        eprintln!("scene {} {}: {}", f.scene_id, f.track, f.error);
    }
    let worst = drafts.failures.iter().map(|f| generation_code(&f.error)).max().unwrap_or(Code::Backend);
    Err(fail(worst, format!("{} track(s) failed to draft", drafts.failures.len())))
}

pub fn cmd_validate(cfg: &CliConfig, repair: bool) -> CmdResult {
    let (project, plan) = open_project(&cfg.root)?;
    let review = ProjectReview::open(project.clone()).map_err(review_err)?;
    let engine = select_engine(cfg.engine);
    let backend = cfg.make_backend().code(Code::Usage)?;
    let templates = TemplateSet::builtin();
    let vcfg = ValidationConfig {
        tolerance_s: cfg.tolerance_s,
        max_attempts: cfg.generation.max_attempts,
        ..ValidationConfig::default()
    };
    let mut outcome = Code::Ok;
    for scene in &plan.scenes {
        let sid = scene.scene_id;
        let mut pair = project.latest_pair(sid).context("missing drafts; run `scenesmith draft` first").code(Code::Usage)?;
        let (report, decision) = loop {
            let (report, timeline) = validate_scene(&plan, scene, &pair, engine.as_ref(), &vcfg).code(Code::Backend)?;
            if let Some(t) = &timeline {
                project.save_timeline(t).code(Code::Usage)?;
            }
            project.save_report(&report).code(Code::Usage)?;
            let decision = route(&report, vcfg.max_attempts);
            if !repair || matches!(decision, Decision::Merge | Decision::EscalateToReview { .. }) {
                break (report, decision);
            }
            let out = repair_once(&plan, &pair, &report, timeline.as_ref(), backend.as_ref(), &templates, &cfg.generation, &vcfg);
            match out {
                Ok(RepairOutcome::Repaired { track, artifact }) => {
                    log::info!("scene {sid}: repaired {track} -> v{}", artifact.version);
                    project.save_artifact(&artifact).code(Code::Usage)?;
                    review.artifact_changed(sid, track, artifact.version).map_err(review_err)?;
                    pair = project.latest_pair(sid).code(Code::Usage)?;
                }
                Ok(_) => break (report, decision),
                Err(e @ (RepairError::Retime(_) | RepairError::NoTimeline)) => {
                    log::warn!("scene {sid}: {e}");
                    break (report, decision);
                }
                Err(RepairError::Generation(e)) => {
                    return Err(Failure { code: generation_code(&e), error: e.into() });
                }
            }
        };
        let state = review.snapshot().get(sid).map(|e| e.state);
        match decision {
            Decision::Merge if state == Some(SceneState::Draft) => {
                review.mark_validated(&report, vcfg.max_attempts).map_err(review_err)?;
            }
            Decision::EscalateToReview { .. } if state == Some(SceneState::Draft) => {
                review.escalate(sid).map_err(review_err)?;
            }
            _ => {}
        }
        let errors = report.errors().count();
        let warnings = report.findings.len() - errors;
        println!("scene {sid}: {} ({errors} errors, {warnings} warnings)", describe(&decision));
        for f in &report.findings {
            println!("  [{:?}] {:?}: {}", f.severity, f.check, f.message);
        }
        let code = if errors > 0 {
            Code::Invalid
        } else if warnings > 0 {
            Code::Warnings
        } else {
            Code::Ok
        };
        outcome = outcome.max(code);
    }
    Ok(outcome)
}

fn describe(d: &Decision) -> String {
    match d {
        Decision::Merge => "merge".into(),
        Decision::Retime { track, .. } => format!("retime {track}"),
        Decision::Regenerate { track, .. } => format!("regenerate {track}"),
        Decision::EscalateToReview { track, .. } => format!("escalated to review ({track})"),
    }
}

pub fn cmd_assemble(cfg: &CliConfig, require_approval: bool) -> CmdResult {
    let (project, plan) = open_project(&cfg.root)?;
    let review = ProjectReview::open(project.clone()).map_err(review_err)?;
    let engine: Box<dyn RenderEngine> = select_engine(cfg.engine);
    let pairs = project.latest_pairs(&plan).code(Code::Usage)?;
    let (mut timelines, mut reports) = (BTreeMap::new(), BTreeMap::new());
    for s in &plan.scenes {
        if let Some(t) = project.load_timeline(s.scene_id).code(Code::Usage)? {
            timelines.insert(s.scene_id, t);
        }
        if let Some(r) = project.load_report(s.scene_id).code(Code::Usage)? {
            reports.insert(s.scene_id, r);
        }
    }
    let book = review.snapshot();
    let approved = |sid| book.get(sid).is_some_and(|e| matches!(e.state, SceneState::Approved | SceneState::Rendered));
    let unapproved: Vec<String> =
        plan.scenes.iter().filter(|s| !approved(s.scene_id)).map(|s| s.scene_id.to_string()).collect();
    if require_approval && !unapproved.is_empty() {
        return Err(fail(Code::Invalid, format!("scenes not approved in review: {}", unapproved.join(", "))));
    }
    let bundle = merge_project(&plan, &pairs, &timelines, &reports, cfg.generation.max_attempts).map_err(|e| {
        let code = match e {
            AssemblyError::EngineFailure { .. } => Code::Backend,
            _ => Code::Invalid,
        };
        Failure { code, error: anyhow::Error::new(e).context("run `scenesmith validate` until every scene merges") }
    })?;
    write_bundle(&project, &bundle).code(Code::Usage)?;
    let rendered = render(&bundle, engine.as_ref(), plan.seed, &project.path("out")).code(Code::Backend)?;
    project.write_json("out/render.json", &rendered).code(Code::Usage)?;
    for s in &plan.scenes {
        if approved(s.scene_id) {
            review.mark_rendered(s.scene_id).map_err(review_err)?;
        }
    }
    if !unapproved.is_empty() {
        log::info!("rendered as preview; not yet approved in review: scenes {}", unapproved.join(", "));
    }
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let manifest = write_manifest(&project, &engine.info(), &now).code(Code::Usage)?;
    println!(
        "assembled {} scenes, {} cues; render digest {}; manifest lists {} files",
        bundle.scripts.len(),
        bundle.cues.len(),
        rendered.digest,
        manifest.artifact_digests.len()
    );
    Ok(Code::Ok)
}

fn regression_code(e: &RegressionError) -> Code {
    match e {
        RegressionError::MissingBaseline(_) | RegressionError::UnknownScene(_) | RegressionError::Project(_) => {
            Code::Usage
        }
        RegressionError::Timeline { .. } => Code::Invalid,
        RegressionError::Generation { source, .. } => generation_code(source),
        RegressionError::Engine { .. } => Code::Backend,
    }
}

pub fn cmd_regress(cfg: &CliConfig, do_bless: bool) -> CmdResult {
    let (project, _) = open_project(&cfg.root)?;
    let backend = cfg.make_backend().code(Code::Usage)?;
    let templates = TemplateSet::builtin();
    let engine = select_engine(cfg.engine);
    let rerr = |e: RegressionError| Failure { code: regression_code(&e), error: e.into() };
    if do_bless {
        let cases = cases_from_plan(&project).code(Code::Usage)?;
        for case in &cases {
            let scene = bless(case, backend.as_ref(), &templates, engine.as_ref()).map_err(rerr)?;
            save_scene(&project, &scene).code(Code::Usage)?;
            println!("blessed {}", case.name);
        }
        return Ok(Code::Ok);
    }
    let suite = load_suite(&project).map_err(rerr)?;
    if suite.is_empty() {
        return Err(fail(Code::Usage, "no regression baselines; run `scenesmith regress --bless` first"));
    }
    let report = regression_run(&suite, backend.as_ref(), &templates, engine.as_ref()).map_err(rerr)?;
    project.write_json("regression/report.json", &report).code(Code::Usage)?;
    for v in &report.verdicts {
        println!(
            "{:<12} {:<9} digest {}  max timing delta {:.3} s{}",
            v.case,
            if v.verdict == Verdict::Deviation { "DEVIATION" } else { "match" },
            if v.digest_changed { "changed" } else { "same" },
            v.max_timing_delta_s,
            if v.structure_changed { "  structure changed" } else { "" }
        );
    }
    println!("{} deviation(s); {}", report.deviations(), report.method);
    Ok(if report.deviations() > 0 { Code::Invalid } else { Code::Ok })
}

