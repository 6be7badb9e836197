//! Render engines. The stub engine interprets the restricted script dialect
//! without drawing frames and digests the resulting event trace; the Manim
//! adapter shells out to the real tool when it is installed.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::script::class_name;

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum EngineError {
    #[error("render engine unavailable: {reason}")]
    EngineUnavailable { reason: String },
    #[error("run exceeded its budget of {budget_s} s")]
    Timeout { budget_s: f64 },
    #[error("runtime fault at line {line}: {diagnostic}")]
    RuntimeFault { line: usize, diagnostic: String },
}

/// Ordered trace of scene construction steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DryRun {
    pub trace: Vec<String>,
}

impl DryRun {
    pub fn digest(&self) -> String {
        sha256_hex(self.trace.join("\n").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneRender {
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineInfo {
    pub engine_id: String,
    pub version: String,
    pub latex_version: String,
}

pub trait RenderEngine: Send + Sync {
    fn info(&self) -> EngineInfo;

    /// Per-scene budget used when the caller does not set one.
    fn default_budget(&self) -> Duration;

    /// Math checker for one LaTeX fragment; `Err` carries a diagnostic.
    fn check_latex(&self, fragment: &str) -> Result<(), String>;

    /// Constructs the scene without rendering frames.
    fn dry_run(&self, script: &str, seed: u64, budget: Duration) -> Result<DryRun, EngineError>;

    fn render_scene(&self, scene_number: u32, script: &str, seed: u64, out_dir: &Path)
        -> Result<SceneRender, EngineError>;
}

/// Delimiter balance for `{}` (ignoring `\{` and `\}`), `\left`/`\right`
/// and inline `$`.
pub fn latex_balance(fragment: &str) -> Result<(), String> {
    let mut depth: i64 = 0;
    let mut dollars = 0;
    let chars: Vec<char> = fragment.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '\\' => {
                i += 2;
                continue;
            }
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth < 0 {
                    return Err(format!("unmatched `}}` at {i}"));
                }
            }
            '$' => dollars += 1,
            _ => {}
        }
        i += 1;
    }
    if depth != 0 {
        return Err("unclosed `{`".into());
    }
    if dollars % 2 != 0 {
        return Err("unbalanced `$`".into());
    }
    if fragment.matches("\\left").count() != fragment.matches("\\right").count() {
        return Err("`\\left` without matching `\\right`".into());
    }
    Ok(())
}

/// Deterministic in-process engine.
#[derive(Debug, Clone)]
pub struct StubEngine {
    budget: Duration,
}

impl Default for StubEngine {
    fn default() -> Self {
        Self { budget: Duration::from_secs(5) }
    }
}

impl StubEngine {
    pub fn new() -> Self {
        Self::default()
    }
}

fn is_unseeded_random_call(line: &str) -> bool {
    (line.contains("random.") || line.contains("np.random.")) && !line.contains(".seed(")
}

fn seed_call(line: &str) -> Option<u64> {
    let i = line.find(".seed(")?;
    let rest = &line[i + 6..];
    rest[..rest.find(')')?].trim().parse().ok()
}

impl RenderEngine for StubEngine {
    fn info(&self) -> EngineInfo {
        EngineInfo {
            engine_id: "stub".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            latex_version: "stub-math-1".into(),
        }
    }

    fn default_budget(&self) -> Duration {
        self.budget
    }

    fn check_latex(&self, fragment: &str) -> Result<(), String> {
        latex_balance(fragment)
    }

    fn dry_run(&self, script: &str, seed: u64, budget: Duration) -> Result<DryRun, EngineError> {
        let started = Instant::now();
        let mut seeded: Option<ChaCha8Rng> = None;
        let mut trace = vec![format!("seed {seed}")];
        for (i, raw) in script.lines().enumerate() {
            if started.elapsed() > budget {
                return Err(EngineError::Timeout { budget_s: budget.as_secs_f64() });
            }
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with("while True") {
                return Err(EngineError::Timeout { budget_s: budget.as_secs_f64() });
            }
            if line.starts_with("raise ") || line == "raise" {
                return Err(EngineError::RuntimeFault { line: i + 1, diagnostic: line.to_string() });
            }
            if let Some(s) = seed_call(line) {
                seeded = Some(ChaCha8Rng::seed_from_u64(s));
                continue;
            }
            if is_unseeded_random_call(line) {
                let draw: u64 = match seeded.as_mut() {
                    Some(rng) => rng.random(),
                    None => rand::rng().random(),
                };
                trace.push(format!("random {draw}"));
            }
            if line.starts_with("class ") {
                trace.push(line.trim_end_matches(':').to_string());
            } else if line.starts_with("self.") || line.starts_with("_wait_until(") {
                trace.push(line.to_string());
            }
        }
        Ok(DryRun { trace })
    }

    fn render_scene(
        &self,
        _scene_number: u32,
        script: &str,
        seed: u64,
        _out_dir: &Path,
    ) -> Result<SceneRender, EngineError> {
        let run = self.dry_run(script, seed, self.budget)?;
        Ok(SceneRender { digest: run.digest(), video: None })
    }
}

/// Adapter for the external Manim CLI. Checks, dry runs and LaTeX use the
/// stub interpreter; only rendering shells out.
#[derive(Debug, Clone)]
pub struct ManimEngine {
    program: PathBuf,
    version: String,
    latex_version: String,
    stub: StubEngine,
}

fn first_line_of(cmd: &mut Command) -> Option<String> {
    let out = cmd.output().ok()?;
    if !out.status.success() {
        return None;
    }
    String::from_utf8_lossy(&out.stdout).lines().next().map(|l| l.trim().to_string())
}

impl ManimEngine {
    /// Finds `manim` on the path, or `None` when it is not installed.
    pub fn detect(program: impl Into<PathBuf>) -> Option<Self> {
        let program = program.into();
        let version = first_line_of(Command::new(&program).arg("--version"))?;
        let latex_version = first_line_of(Command::new("latex").arg("--version")).unwrap_or_else(|| "none".into());
        Some(Self { program, version, latex_version, stub: StubEngine { budget: Duration::from_secs(120) } })
    }
}

impl RenderEngine for ManimEngine {
    fn info(&self) -> EngineInfo {
        EngineInfo { engine_id: "manim".into(), version: self.version.clone(), latex_version: self.latex_version.clone() }
    }

    fn default_budget(&self) -> Duration {
        Duration::from_secs(120)
    }

    fn check_latex(&self, fragment: &str) -> Result<(), String> {
        latex_balance(fragment)
    }

    fn dry_run(&self, script: &str, seed: u64, budget: Duration) -> Result<DryRun, EngineError> {
        self.stub.dry_run(script, seed, budget)
    }

    fn render_scene(
        &self,
        scene_number: u32,
        script: &str,
        _seed: u64,
        out_dir: &Path,
    ) -> Result<SceneRender, EngineError> {
        let fault = |diagnostic: String| EngineError::RuntimeFault { line: 0, diagnostic };
        let file = out_dir.join(format!("scene_{scene_number}.py"));
        std::fs::write(&file, script).map_err(|e| fault(e.to_string()))?;
        let media = out_dir.join("media");
        let out = Command::new(&self.program)
            .arg("render")
            .arg("-ql")
            .arg("--media_dir")
            .arg(&media)
            .arg(&file)
            .arg(class_name(scene_number))
            .output()
            .map_err(|e| EngineError::EngineUnavailable { reason: e.to_string() })?;
        if !out.status.success() {
            return Err(fault(String::from_utf8_lossy(&out.stderr).trim().to_string()));
        }
        let video = find_video(&media, &class_name(scene_number));
        let digest = match &video {
            Some(p) => sha256_hex(&std::fs::read(p).map_err(|e| fault(e.to_string()))?),
            None => sha256_hex(&out.stdout),
        };
        Ok(SceneRender { digest, video })
    }
}

fn find_video(dir: &Path, class: &str) -> Option<PathBuf> {
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).ok()?.flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_stem().is_some_and(|s| s == class) && p.extension().is_some_and(|e| e == "mp4") {
                return Some(p);
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    #[default]
    Stub,
    Manim,
}

/// Builds the requested engine. A missing Manim install falls back to the
/// stub engine with a warning.
pub fn select_engine(kind: EngineKind) -> Box<dyn RenderEngine> {
    match kind {
        EngineKind::Stub => Box::new(StubEngine::new()),
        EngineKind::Manim => match ManimEngine::detect("manim") {
            Some(m) => Box::new(m),
            None => {
                log::warn!("manim not found on PATH; using the stub engine");
                Box::new(StubEngine::new())
            }
        },
    }
}
