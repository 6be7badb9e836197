mod analyze;
mod config;
mod exit;
mod pipeline;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scenesmith_core::engine::EngineKind;

use config::{BackendKind, CliConfig, FileConfig, Overrides, CONFIG_FILE};
use exit::{CmdResult, Code, WithCode};

#[derive(Parser)]
#[command(name = "scenesmith", version, about = "Plan, draft, validate and assemble narrated math animations")]
struct Cli {
    /// Project directory (for `review serve`, a directory of projects).
    #[arg(long, global = true, default_value = ".")]
    root: PathBuf,
    /// Config file; defaults to `<root>/scenesmith.toml`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    /// `stub` or `manim`.
    #[arg(long, global = true, value_parser = parse_engine)]
    engine: Option<EngineKind>,
    /// Allowed cue/event drift in seconds.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true)]
    port: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create the project and its lesson plan from a brief (JSON or TOML).
    Plan { brief: PathBuf },
    /// Draft narration and code for every scene.
    Draft,
    /// Check every scene; `--repair` regenerates or retimes until each
    /// scene merges or escalates.
    Validate {
        #[arg(long)]
        repair: bool,
    },
    /// Merge scenes, write captions and narration, render and write the manifest.
    Assemble {
        /// Fail unless every scene was approved in review.
        #[arg(long)]
        require_approval: bool,
    },
    /// Compare regenerated scenes with blessed baselines.
    Regress {
        /// Record the current output as the new baselines.
        #[arg(long)]
        bless: bool,
    },
    Review {
        #[command(subcommand)]
        command: ReviewCommand,
    },
    /// Run the study analysis on a CSV or on the calibrated synthetic study.
    Analyze {
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        csv: Option<PathBuf>,
        #[arg(long)]
        synthetic: bool,
        /// Output directory; defaults to `<root>/analysis`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        resamples: usize,
    },
}

#[derive(Subcommand)]
enum ReviewCommand {
    /// Serve the review API for every project under `--root`.
    Serve,
}

fn parse_engine(s: &str) -> Result<EngineKind, String> {
    match s {
        "stub" => Ok(EngineKind::Stub),
        "manim" => Ok(EngineKind::Manim),
        other => Err(format!("unknown engine `{other}` (expected stub or manim)")),
    }
}

fn run(cli: Cli) -> CmdResult {
    let config_path = cli.config.clone().unwrap_or_else(|| cli.root.join(CONFIG_FILE));
    let file = FileConfig::load(&config_path).code(Code::Usage)?;
    let flags = Overrides { seed: cli.seed, backend: cli.backend, engine: cli.engine, tolerance: cli.tolerance, port: cli.port };
    let cfg = CliConfig::resolve(cli.root.clone(), file, &flags).code(Code::Usage)?;
    match cli.command {
        Command::Plan { brief } => pipeline::cmd_plan(&cfg, &brief),
        Command::Draft => pipeline::cmd_draft(&cfg),
        Command::Validate { repair } => pipeline::cmd_validate(&cfg, repair),
        Command::Assemble { require_approval } => pipeline::cmd_assemble(&cfg, require_approval),
        Command::Regress { bless } => pipeline::cmd_regress(&cfg, bless),
        Command::Review { command: ReviewCommand::Serve } => serve::cmd_serve(&cfg),
        Command::Analyze { csv, synthetic, out, resamples } => {
            let source = match (csv, synthetic) {
                (Some(path), false) => analyze::Source::Csv(path),
                _ => analyze::Source::Synthetic,
            };
            let out = out.unwrap_or_else(|| cfg.root.join("analysis"));
            analyze::cmd_analyze(source, cfg.seed, resamples, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors; the contract reserves 2 for warnings.
            return ExitCode::from(if e.use_stderr() { Code::Usage as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
