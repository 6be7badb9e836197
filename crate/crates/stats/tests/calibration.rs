//! The calibrated synthetic study and the analysis report built on it.

use scenesmith_stats::describe::{mean, sd};
use scenesmith_stats::report::render_text;
use scenesmith_stats::synthetic::PairedTarget;
use scenesmith_stats::{
    analyze_study, bootstrap_ci, cronbach_alpha, emit_plot_data, generate_synthetic_study, BootstrapConfig, Condition,
    StatsError, StudyDataset, StudyTargets,
};

fn check_moments(ds: &StudyDataset, t: &PairedTarget, f: fn(&scenesmith_stats::StudyRow) -> f64, name: &str) {
    let (a, s) = ds.paired(f);
    let d: Vec<f64> = a.iter().zip(&s).map(|(x, y)| x - y).collect();
    for (got, want) in [
        (mean(&a), t.animation.mean),
        (sd(&a), t.animation.sd),
        (mean(&s), t.slides.mean),
        (sd(&s), t.slides.sd),
        (sd(&d), t.diff_sd()),
    ] {
        assert!((got - want).abs() < 1e-9, "{name}: {got} vs {want}");
    }
}

#[test]
fn moments_are_exact() {
    let t = StudyTargets::default();
    let ds = generate_synthetic_study(&t, 42).unwrap();
    assert_eq!(ds.rows.len(), 200);
    check_moments(&ds, &t.gain, |r| r.gain, "gain");
    check_moments(&ds, &t.imi, |r| r.imi(), "imi");
    check_moments(&ds, &t.tlx, |r| r.tlx(), "tlx");
    check_moments(&ds, &t.satisfaction, |r| r.satisfaction, "satisfaction");
    check_moments(&ds, &t.minutes, |r| r.minutes, "minutes");
    for (c, cond) in [Condition::Animation, Condition::Slides].into_iter().enumerate() {
        let rows: Vec<_> = ds.rows.iter().filter(|r| r.condition == cond).collect();
        let pre: Vec<f64> = rows.iter().map(|r| r.pre).collect();
        let post: Vec<f64> = rows.iter().map(|r| r.post).collect();
        assert!((mean(&pre) - t.pre[c].mean).abs() < 1e-9);
        assert!((sd(&pre) - t.pre[c].sd).abs() < 1e-9);
        assert!((mean(&post) - t.post[c].mean).abs() < 1e-9);
        assert!((sd(&post) - t.post[c].sd).abs() < 1e-9);
    }
    // Difference sd for gains is 4.33 / 0.67.
    assert!((t.gain.diff_sd() - 6.4627).abs() < 1e-4);
}

#[test]
fn report_is_reproducible_bit_for_bit() {
    let t = StudyTargets::default();
    let boot = BootstrapConfig { resamples: 500, seed: 9 };
    let a = analyze_study(&generate_synthetic_study(&t, 5).unwrap(), boot).unwrap();
    let b = analyze_study(&generate_synthetic_study(&t, 5).unwrap(), boot).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = analyze_study(&generate_synthetic_study(&t, 6).unwrap(), boot).unwrap();
    assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
}

#[test]
fn published_signs_and_identity() {
    let ds = generate_synthetic_study(&StudyTargets::default(), 42).unwrap();
    let r = analyze_study(&ds, BootstrapConfig { resamples: 200, seed: 1 }).unwrap();
    let signs: Vec<f64> = r.paired.iter().map(|p| p.test.statistic.signum()).collect();
    assert_eq!(signs, vec![1.0, 1.0, -1.0, 1.0, -1.0]);
    for p in &r.paired {
        assert_eq!(p.test.statistic, p.test.effect_size * 10.0);
    }
    let sat = r.paired_row("satisfaction").unwrap();
    assert!((sat.test.statistic - 16.35).abs() <= 0.15 && (sat.test.effect_size - 1.64).abs() <= 0.15);
    assert!(r.order_effect.test.p_value > 0.5);
    assert!(render_text(&r).contains("ANCOVA"));
}

#[test]
fn plot_series() {
    let ds = generate_synthetic_study(&StudyTargets::default(), 42).unwrap();
    let r = analyze_study(&ds, BootstrapConfig { resamples: 200, seed: 1 }).unwrap();
    let files = emit_plot_data(&r);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["learning_performance.csv", "engagement_box.csv", "workload_box.csv", "subgroup_advantage.csv"]);
    let t = StudyTargets::default();
    let lines: Vec<&str> = files[0].1.lines().collect();
    assert_eq!(lines[0], "condition,pre_mean,post_mean,gain_mean,gain_sd");
    let anim: Vec<f64> = lines[1].split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert!(lines[1].starts_with("animation,"));
    assert!((anim[0] - t.pre[0].mean).abs() < 1e-9 && (anim[1] - t.post[0].mean).abs() < 1e-9);
    assert!((anim[2] - t.gain.animation.mean).abs() < 1e-9);
    assert_eq!(files[3].1.lines().count(), 3);
}

#[test]
fn csv_round_trip_and_schema_errors() {
    let ds = generate_synthetic_study(&StudyTargets::default(), 3).unwrap();
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let back = StudyDataset::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, ds);

    let mut missing = ds.clone();
    missing.rows.remove(1);
    assert!(matches!(
        missing.validate(),
        Err(StatsError::SchemaViolation { row: 1, ref field, .. }) if field == "condition"
    ));
    let mut bad = ds.clone();
    bad.rows[4].imi_items[2] = 7.5;
    assert!(matches!(bad.validate(), Err(StatsError::SchemaViolation { row: 5, ref field, .. }) if field == "imi_3"));
    let text = String::from_utf8(buf).unwrap().replacen("participant_id", "pid", 1);
    assert!(matches!(
        StudyDataset::read_csv(text.as_bytes()),
        Err(StatsError::SchemaViolation { row: 0, ref field, .. }) if field == "participant_id"
    ));
}

#[test]
fn infeasible_targets_are_rejected() {
    let mut t = StudyTargets::default();
    t.gain.d = 0.1; // difference sd 43.3 cannot coexist with condition sds near 5
    assert!(matches!(generate_synthetic_study(&t, 1), Err(StatsError::InfeasibleTargets(_))));
}

#[test]
fn bootstrap_is_seeded_and_contains_estimate() {
    let ds = generate_synthetic_study(&StudyTargets::default(), 42).unwrap();
    let pairs = ds.pairs();
    let est = |idx: &[usize]| {
        let rows: Vec<Vec<f64>> = idx.iter().flat_map(|&i| [pairs[i].0.imi_items.to_vec(), pairs[i].1.imi_items.to_vec()]).collect();
        cronbach_alpha(&rows)
    };
    let all: Vec<usize> = (0..pairs.len()).collect();
    let point = est(&all).unwrap();
    let cfg = BootstrapConfig { resamples: 400, seed: 11 };
    let a = bootstrap_ci(pairs.len(), est, cfg).unwrap();
    assert_eq!(a, bootstrap_ci(pairs.len(), est, cfg).unwrap());
    assert!(a.0 <= point && point <= a.1);
    assert_eq!(bootstrap_ci(3, est, BootstrapConfig { resamples: 50, seed: 1 }), Err(StatsError::TooFewResamples(50)));
    // Constant data is degenerate on every resample.
    let flat = |_: &[usize]| cronbach_alpha(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
    assert!(matches!(bootstrap_ci(5, flat, cfg), Err(StatsError::DegenerateResample { retries: 10, .. })));
}
