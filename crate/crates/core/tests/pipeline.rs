use scenesmith_core::engine::StubEngine;
use scenesmith_core::generation::{
    build_plan, draft_tracks, GenerationConfig, TemplateBackend, TemplateSet,
};
use scenesmith_core::plan::{validate_plan, AudienceLevel, ConceptBrief, LessonPlan};
use scenesmith_core::validation::faults::{inject, Fault};
use scenesmith_core::validation::{
    repair_once, route, validate_scene, Check, Decision, RepairOutcome, ValidationConfig,
};

fn brief(topic: &str, target: f64) -> ConceptBrief {
    ConceptBrief {
        topic_title: topic.into(),
        audience_level: AudienceLevel::Intermediate,
        learning_objective: "see the key idea".into(),
        target_duration_s: target,
        notes: None,
    }
}

fn plan_for(topic: &str, target: f64) -> LessonPlan {
    build_plan(&brief(topic, target), &TemplateBackend::new(), &TemplateSet::builtin(), 7, &GenerationConfig::default())
        .unwrap()
}

#[test]
fn every_topic_and_length_validates_clean() {
    let engine = StubEngine::new();
    let templates = TemplateSet::builtin();
    for topic in ["Eigenvalues", "Linear transformations", "Kinematics", "Fourier series"] {
        for target in [180.0, 270.0, 420.0, 600.0] {
            let plan = plan_for(topic, target);
            assert_eq!(validate_plan(&plan), vec![], "{topic} {target}");
            let drafts = draft_tracks(&plan, &TemplateBackend::new(), &templates, &GenerationConfig::default());
            assert!(drafts.failures.is_empty());
            for (sid, pair) in drafts.pairs() {
                let scene = plan.scene(sid).unwrap();
                let (report, timeline) =
                    validate_scene(&plan, scene, &pair, &engine, &ValidationConfig::default()).unwrap();
                assert!(timeline.is_some());
                assert!(report.findings.is_empty(), "{topic} {target} scene {sid}: {:#?}", report.findings);
                assert_eq!(route(&report, 3), Decision::Merge);
            }
        }
    }
}

#[test]
fn each_fault_fires_only_its_check_and_one_repair_fixes_it() {
    let engine = StubEngine::new();
    let templates = TemplateSet::builtin();
    let backend = TemplateBackend::new();
    let gen = GenerationConfig::default();
    let config = ValidationConfig::default();
    for topic in ["Eigenvalues", "Kinematics"] {
        let plan = plan_for(topic, 270.0);
        let pairs = draft_tracks(&plan, &backend, &templates, &gen).pairs();
        for fault in Fault::ALL {
            for (sid, pair) in &pairs {
                let scene = plan.scene(*sid).unwrap();
                let broken = inject(fault, pair, scene, &plan.ledger).expect("fault applies");
                let (report, timeline) = validate_scene(&plan, scene, &broken, &engine, &config).unwrap();
                let expected = match fault {
                    Fault::ForbiddenImport => Check::Run,
                    Fault::Drift => Check::Alignment,
                    Fault::UnitMismatch => Check::SymbolUnit,
                    Fault::MissingKeyword => Check::GoalCoverage,
                };
                let fired: Vec<Check> = report.findings.iter().map(|f| f.check).collect();
                assert!(fired.iter().all(|c| *c == expected), "{fault:?}: {:#?}", report.findings);
                assert!(!fired.is_empty());
                let decision = route(&report, 3);
                let track = match decision {
                    Decision::Regenerate { track, .. } | Decision::Retime { track, .. } => track,
                    other => panic!("{other:?}"),
                };
                assert_eq!(track, fault.track());
                let out =
                    repair_once(&plan, &broken, &report, timeline.as_ref(), &backend, &templates, &gen, &config)
                        .unwrap();
                let RepairOutcome::Repaired { artifact, .. } = out else { panic!("{out:?}") };
                let mut fixed = broken.clone();
                fixed.set(artifact);
                assert_eq!(fixed.get(track).version, 2);
                assert_eq!(fixed.get(track.sibling()).version, 1);
                let (after, _) = validate_scene(&plan, scene, &fixed, &engine, &config).unwrap();
                assert!(after.findings.is_empty(), "{fault:?} after repair: {:#?}", after.findings);
            }
        }
    }
}
