//! Headline acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS or FAIL line, then exits non-zero if
//! any failed.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenesmith_core::assembly::regression::{bless, cases_from_plan, regression_run, RegressionReport, Verdict};
use scenesmith_core::assembly::Project;
use scenesmith_core::engine::StubEngine;
use scenesmith_core::generation::{build_plan, draft_tracks, GenerationConfig, TemplateBackend, TemplateSet};
use scenesmith_core::plan::{AudienceLevel, ConceptBrief, SceneId, SymbolEntry, SymbolLedger};
use scenesmith_core::units::{parse_unit, Dimension};
use scenesmith_core::validation::faults::{inject, Fault};
use scenesmith_core::validation::{
    repair_once, route, validate_scene, Check, Decision, RepairOutcome, ValidationConfig,
};
use scenesmith_stats::linear::ancova;
use scenesmith_stats::{cohen_kappa, cronbach_alpha, paired_t};

#[path = "../../core/tests/support/mod.rs"]
mod support;
#[path = "../../stats/tests/support/normal_equations.rs"]
mod normal_equations;

use normal_equations::normal_equations;
use support::review_model::{exhaustive, replay_matches, Op};
use support::shift::ShiftedBackend;
use support::unit_exprs::{expr, term};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("statistics oracles", stats_oracles),
        ("synthetic study reproduction", synthetic_study),
        ("t = d * sqrt(n) identity", t_equals_d_root_n),
        ("end-to-end determinism", end_to_end_determinism),
        ("fault injection", fault_injection),
        ("unit algebra properties", unit_algebra),
        ("review state machine", review_state_machine),
        ("regression harness", regression_harness),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({took:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name} ({took:.2}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn bin(root: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_scenesmith"))
        .arg("--root")
        .arg(root)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn scenesmith");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn brief_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../briefs").join(name)
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took < budget {
        Ok(())
    } else {
        Err(format!("took {took:.2?}, budget {budget:?}"))
    }
}

fn stats_oracles() -> Outcome {
    let start = Instant::now();
    let k = cohen_kappa(&[vec![40.0, 10.0], vec![10.0, 40.0]]).map_err(|e| e.to_string())?;
    ensure!((k - 0.6).abs() < 1e-12, "kappa {k}");
    let identical: Vec<Vec<f64>> = [1.0, 3.0, 2.0, 5.0, 4.0].iter().map(|v| vec![*v; 4]).collect();
    let a = cronbach_alpha(&identical).map_err(|e| e.to_string())?;
    ensure!((a - 1.0).abs() < 1e-12, "alpha(identical) {a}");
    let uncorrelated = vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0]];
    let a = cronbach_alpha(&uncorrelated).map_err(|e| e.to_string())?;
    ensure!(a.abs() < 1e-12, "alpha(uncorrelated) {a}");
    let d = paired_t(&[1.0, 2.0, 2.0], &[0.0; 3]).map_err(|e| e.to_string())?.effect_size;
    ensure!((d - 2.8868).abs() < 1e-4, "d {d}");

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(6..=20);
        let pre: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..90.0)).collect();
        let mut cond: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        cond[..4].copy_from_slice(&[true, true, false, false]);
        let post: Vec<f64> = pre
            .iter()
            .zip(&cond)
            .map(|(p, c)| 5.0 + 0.9 * p + if *c { 4.0 } else { 0.0 } + rng.random_range(-15.0..15.0))
            .collect();
        let fit = ancova(&post, &pre, &cond).map_err(|e| e.to_string())?;
        let design: Vec<Vec<f64>> =
            pre.iter().zip(&cond).map(|(p, c)| vec![1.0, f64::from(u8::from(*c)), *p]).collect();
        let oracle = normal_equations(&design, &post);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst < 1e-9, "ANCOVA coefficients differ from normal equations by {worst:e}");
    within_budget(start, Duration::from_secs(5))?;
    Ok(format!("kappa 0.6, alpha 1/0, d {d:.4}, ANCOVA max coefficient error {worst:.1e} over 200 fixtures"))
}

fn synthetic_study() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("analysis");
    let (code, stderr) = bin(dir.path(), &["analyze", "--synthetic", "--seed", "42", "--out", out.to_str().unwrap()]);
    ensure!(code == 0, "analyze exited {code}: {stderr}");
    within_budget(start, Duration::from_secs(30))?;
    let text = std::fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
    let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let targets = [
        ("gain", 6.74, 0.67),
        ("imi", 9.44, 0.94),
        ("tlx", -4.06, -0.41),
        ("satisfaction", 16.35, 1.64),
        ("minutes", -8.56, -0.86),
    ];
    let paired = report["paired"].as_array().ok_or("no paired rows")?;
    let mut misses = Vec::new();
    for (measure, t, d) in targets {
        let row = paired.iter().find(|r| r["measure"] == measure).ok_or(format!("no {measure} row"))?;
        let (got_t, got_d) = (row["test"]["statistic"].as_f64().unwrap(), row["test"]["effect_size"].as_f64().unwrap());
        if (got_t - t).abs() > 0.15 || (got_d - d).abs() > 0.15 {
            misses.push(format!("{measure} t {got_t:.2} d {got_d:.2}"));
        }
    }
    ensure!(misses.is_empty(), "paired rows out of band: {}", misses.join(", "));
    let f = report["ancova"]["f"].as_f64().unwrap();
    let eta = report["ancova"]["partial_eta_sq"].as_f64().unwrap();
    ensure!((f - 38.85).abs() <= 0.25 * 38.85, "ANCOVA F {f}");
    ensure!((0.12..=0.21).contains(&eta), "partial eta^2 {eta}");
    let sub = report["subgroup"]["test"]["statistic"].as_f64().unwrap();
    ensure!((sub + 2.11).abs() <= 0.4, "subgroup t {sub}");
    let imi = report["reliability"]
        .as_array()
        .and_then(|rows| rows.iter().find(|r| r["scale"] == "imi"))
        .and_then(|r| r["alpha"].as_f64())
        .ok_or("no IMI alpha")?;
    ensure!((0.78..=0.86).contains(&imi), "IMI alpha {imi}");
    Ok(format!("F {f:.2}, eta^2 {eta:.3}, subgroup t {sub:.2}, IMI alpha {imi:.3}, all paired rows within 0.15"))
}

fn t_equals_d_root_n() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..1000 {
        let n = rng.random_range(3..200);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let r = paired_t(&x, &y).map_err(|e| e.to_string())?;
        let expect = r.effect_size * (n as f64).sqrt();
        ensure!(
            (r.statistic - expect).abs() <= 4.0 * f64::EPSILON * expect.abs().max(1.0),
            "n {n}: t {} vs d*sqrt(n) {expect}",
            r.statistic
        );
        checked += 1;
    }
    Ok(format!("{checked} samples"))
}

/// Every file under `root`, keyed by relative path.
fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Drops wall-clock fields: `created_at` in the manifest and `at` on each
/// journal line.
fn strip_clock(files: &mut BTreeMap<String, Vec<u8>>) {
    if let Some(bytes) = files.get_mut("manifest.json") {
        let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        v.as_object_mut().unwrap().remove("created_at");
        *bytes = serde_json::to_vec(&v).unwrap();
    }
    if let Some(bytes) = files.get_mut("review/journal.jsonl") {
        let lines: Vec<String> = String::from_utf8_lossy(bytes)
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("at");
                v.to_string()
            })
            .collect();
        *bytes = lines.join("\n").into_bytes();
    }
}

fn end_to_end_determinism() -> Outcome {
    let start = Instant::now();
    let brief = brief_path("kinematics.json");
    let target = 420.0;
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let root = dir.path().join("lesson");
        for args in [vec!["plan", brief.to_str().unwrap()], vec!["draft"], vec!["validate"], vec!["assemble"]] {
            let mut full = vec!["--seed", "7", "--backend", "template", "--engine", "stub"];
            full.extend(args.iter().copied());
            let (code, stderr) = bin(&root, &full);
            ensure!(code == 0, "{} exited {code}: {stderr}", args[0]);
        }
        runs.push((dir, root));
    }
    within_budget(start, Duration::from_secs(60))?;
    let (mut a, mut b) = (tree(&runs[0].1), tree(&runs[1].1));
    ensure!(a.contains_key("manifest.json"), "no manifest written");
    strip_clock(&mut a);
    strip_clock(&mut b);
    let differing: Vec<&String> =
        a.keys().chain(b.keys()).filter(|k| a.get(*k) != b.get(*k)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    ensure!(differing.is_empty(), "files differ between runs: {differing:?}");

    let project = Project::open(&runs[0].1).map_err(|e| e.to_string())?;
    let plan = project.load_plan().map_err(|e| e.to_string())?;
    let durations: Vec<f64> = plan.scenes.iter().map(|s| s.planned_duration_s).collect();
    ensure!(durations.iter().all(|d| (60.0..=120.0).contains(d)), "scene durations {durations:?}");
    let total: f64 = durations.iter().sum();
    ensure!((total - target).abs() <= 0.2 * target, "total {total} vs target {target}");
    Ok(format!("{} files identical, {} scenes, total {total:.0}s of {target:.0}s", a.len(), durations.len()))
}

fn fault_injection() -> Outcome {
    let engine = StubEngine::new();
    let templates = TemplateSet::builtin();
    let backend = TemplateBackend::new();
    let gen = GenerationConfig::default();
    let config = ValidationConfig::default();
    let mut cases = 0;
    for topic in ["Eigenvalues", "Kinematics"] {
        let brief = ConceptBrief {
            topic_title: topic.into(),
            audience_level: AudienceLevel::Intermediate,
            learning_objective: "see the key idea".into(),
            target_duration_s: 270.0,
            notes: None,
        };
        let plan = build_plan(&brief, &backend, &templates, 7, &gen).map_err(|e| e.to_string())?;
        let pairs = draft_tracks(&plan, &backend, &templates, &gen).pairs();
        for fault in Fault::ALL {
            let expected = match fault {
                Fault::ForbiddenImport => Check::Run,
                Fault::Drift => Check::Alignment,
                Fault::UnitMismatch => Check::SymbolUnit,
                Fault::MissingKeyword => Check::GoalCoverage,
            };
            for (sid, pair) in &pairs {
                let ctx = format!("{topic} scene {sid} {fault:?}");
                let scene = plan.scene(*sid).unwrap();
                let broken = inject(fault, pair, scene, &plan.ledger).ok_or(format!("{ctx}: fault did not apply"))?;
                let (report, timeline) =
                    validate_scene(&plan, scene, &broken, &engine, &config).map_err(|e| e.to_string())?;
                ensure!(!report.findings.is_empty(), "{ctx}: nothing fired");
                ensure!(
                    report.findings.iter().all(|f| f.check == expected),
                    "{ctx}: other checks fired: {:?}",
                    report.findings.iter().map(|f| f.check).collect::<Vec<_>>()
                );
                let track = match route(&report, gen.max_attempts) {
                    Decision::Regenerate { track, .. } | Decision::Retime { track, .. } => track,
                    other => return Err(format!("{ctx}: routed to {other:?}")),
                };
                ensure!(track == fault.track(), "{ctx}: routed to {track:?}");
                let out = repair_once(&plan, &broken, &report, timeline.as_ref(), &backend, &templates, &gen, &config)
                    .map_err(|e| format!("{ctx}: {e}"))?;
                let RepairOutcome::Repaired { artifact, .. } = out else {
                    return Err(format!("{ctx}: {out:?}"));
                };
                let mut fixed = broken.clone();
                fixed.set(artifact);
                ensure!(
                    fixed.get(track).version == broken.get(track).version + 1
                        && fixed.get(track.sibling()).version == broken.get(track.sibling()).version,
                    "{ctx}: versions not bumped on exactly one track"
                );
                let (after, _) = validate_scene(&plan, scene, &fixed, &engine, &config).map_err(|e| e.to_string())?;
                ensure!(after.findings.is_empty(), "{ctx}: still failing after repair: {:?}", after.findings);
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} fault/scene cases repaired in one cycle"))
}

fn unit_algebra() -> Outcome {
    const CASES: u32 = 1000;
    let mut runner = TestRunner::new(PropConfig { cases: CASES, failure_persistence: None, ..PropConfig::default() });
    runner
        .run(&expr(), |e| {
            prop_assert_eq!(parse_unit(&e.text).unwrap(), e.dim, "{}", e.text);
            Ok(())
        })
        .map_err(|e| format!("homomorphism: {e}"))?;
    runner
        .run(&term(), |e| {
            let d = parse_unit(&format!("{0} / {0}", e.text)).unwrap();
            prop_assert!(d.is_dimensionless(), "{} / {} gave {}", e.text, e.text, d);
            prop_assert_eq!(e.dim.mul(&e.dim.recip()), Dimension::dimensionless());
            Ok(())
        })
        .map_err(|e| format!("self-cancellation: {e}"))?;
    runner
        .run(&prop::collection::vec((0usize..12, expr(), 1u32..6), 1..10), |entries| {
            let mut ledger = SymbolLedger::new();
            for (i, (name, e, scene)) in entries.iter().enumerate() {
                let entry =
                    SymbolEntry::new(format!("x{name}"), format!("quantity {i}"), e.text.clone(), SceneId(*scene)).unwrap();
                let _ = ledger.register(entry);
            }
            let back: SymbolLedger = serde_json::from_str(&serde_json::to_string(&ledger).unwrap()).unwrap();
            prop_assert_eq!(back, ledger);
            Ok(())
        })
        .map_err(|e| format!("ledger round trip: {e}"))?;
    Ok(format!("{CASES} cases each for homomorphism, self-cancellation and ledger round trip"))
}

fn review_state_machine() -> Outcome {
    let stats = exhaustive(6);
    ensure!(stats.violations.is_empty(), "{} violations, first {}", stats.violations.len(), stats.violations[0]);
    ensure!(stats.rendered_reached > 0, "rendered never reached");
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for i in 0..200 {
        let len = rng.random_range(0..30);
        let ops: Vec<Op> = (0..len).map(|_| Op::decode(rng.random(), rng.random(), rng.random(), rng.random(), 2)).collect();
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        replay_matches(dir.path(), &ops).map_err(|e| format!("sequence {i}: {e}"))?;
    }
    Ok(format!(
        "{} sequences up to length 6 ({} reach rendered), 200 replayed journals",
        stats.sequences, stats.rendered_reached
    ))
}

fn regression_harness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join("lesson");
    let brief = brief_path("eigenvalues.toml");
    for args in [vec!["plan", brief.to_str().unwrap()], vec!["draft"], vec!["validate"], vec!["regress", "--bless"], vec!["regress"]] {
        let (code, stderr) = bin(&root, &args);
        ensure!(code == 0, "{} exited {code}: {stderr}", args.join(" "));
    }
    let project = Project::open(&root).map_err(|e| e.to_string())?;
    let report: RegressionReport = project.read_json("regression/report.json").map_err(|e| e.to_string())?;
    let deviations = report.deviations();
    ensure!(deviations == 0, "no-op run flagged {deviations} deviations");

    let templates = TemplateSet::builtin();
    let engine = StubEngine::new();
    let cases = cases_from_plan(&project).map_err(|e| e.to_string())?;
    let suite: Vec<_> = cases
        .iter()
        .map(|c| bless(c, &TemplateBackend::new(), &templates, &engine))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let shifted = ShiftedBackend { inner: TemplateBackend::new(), scene: 2, delta_s: 1.0 };
    let run = regression_run(&suite, &shifted, &templates, &engine).map_err(|e| e.to_string())?;
    let flagged: Vec<&str> =
        run.verdicts.iter().filter(|v| v.verdict == Verdict::Deviation).map(|v| v.case.as_str()).collect();
    ensure!(flagged == ["scene_2"], "1.0 s shift flagged {flagged:?}");
    Ok(format!("0 deviations on a no-op run of {} scenes; 1.0 s shift flagged {flagged:?}", suite.len()))
}
