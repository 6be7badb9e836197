use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::Context;

use scenesmith_stats::report::render_text;
use scenesmith_stats::{
    analyze_study, emit_plot_data, generate_synthetic_study, BootstrapConfig, StatsError, StudyDataset, StudyTargets,
};

use crate::exit::{CmdResult, Code, Failure, WithCode};

pub enum Source {
    Csv(PathBuf),
    Synthetic,
}

fn stats_err(e: StatsError) -> Failure {
    Failure { code: Code::Invalid, error: e.into() }
}

/// Writes `dataset.csv` (synthetic runs only), `report.json`, `report.txt`
/// and one CSV per figure series into `out`.
pub fn cmd_analyze(source: Source, seed: u64, resamples: usize, out: &Path) -> CmdResult {
    let ds = match &source {
        Source::Synthetic => generate_synthetic_study(&StudyTargets::default(), seed).map_err(stats_err)?,
        Source::Csv(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display())).code(Code::Usage)?;
            StudyDataset::read_csv(f).map_err(stats_err)?
        }
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).code(Code::Usage)?;
    let write = |name: &str, bytes: &[u8]| {
        let path = out.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display())).code(Code::Usage)
    };
    if matches!(source, Source::Synthetic) {
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).code(Code::Usage)?;
        write("dataset.csv", &buf)?;
    }
    let report = analyze_study(&ds, BootstrapConfig { resamples, seed }).map_err(stats_err)?;
    let text = render_text(&report);
    write("report.json", serde_json::to_string_pretty(&report).code(Code::Usage)?.as_bytes())?;
    write("report.txt", text.as_bytes())?;
    for (name, csv) in emit_plot_data(&report) {
        write(&name, csv.as_bytes())?;
    }
    print!("{text}");
    Ok(Code::Ok)
}
