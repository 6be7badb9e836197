//! Emitting and editing Manim-compatible scene scripts.
//!
//! Scripts carry their timeline as structured comments:
//!
//! ```text
//! # @event <id> <kind> <start> <duration> [symbols...]
//! # @bind <cue_id> <event_id>
//! ```
//!
//! Each event block is followed by a `_wait_until(self, <start>)` call so the
//! rendered timing follows the annotation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Restricted animation primitives a scene may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Highlight,
    Transform,
    Annotate,
    Add,
    Remove,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::Highlight,
        EventKind::Transform,
        EventKind::Annotate,
        EventKind::Add,
        EventKind::Remove,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Highlight => "highlight",
            EventKind::Transform => "transform",
            EventKind::Annotate => "annotate",
            EventKind::Add => "add",
            EventKind::Remove => "remove",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Kinds that direct attention to a symbol.
    pub fn is_signal(self) -> bool {
        matches!(self, EventKind::Highlight | EventKind::Transform)
    }
}

/// Modules a generated script may import.
pub const DEFAULT_IMPORT_WHITELIST: &[&str] = &["manim", "numpy", "math", "random"];

pub fn format_seconds(t: f64) -> String {
    format!("{t:.1}")
}

/// One event block of a scene script.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEvent {
    pub id: String,
    pub kind: EventKind,
    pub start_s: f64,
    pub duration_s: f64,
    pub symbols: Vec<String>,
    pub bound_cue: Option<String>,
    pub note: String,
}

/// LaTeX for a ledger symbol's display notation.
pub fn symbol_tex(name: &str) -> String {
    const GREEK: &[(&str, &str)] = &[
        ("α", r"\alpha"),
        ("β", r"\beta"),
        ("γ", r"\gamma"),
        ("δ", r"\delta"),
        ("θ", r"\theta"),
        ("λ", r"\lambda"),
        ("μ", r"\mu"),
        ("ω", r"\omega"),
        ("τ", r"\tau"),
    ];
    let mut out = String::new();
    for ch in name.chars() {
        match GREEK.iter().find(|(g, _)| g.starts_with(ch)) {
            Some((_, tex)) => {
                out.push_str(tex);
                out.push(' ');
            }
            None => out.push(ch),
        }
    }
    out.trim_end().to_string()
}

/// A Python identifier for a symbol's mobject.
pub fn symbol_ident(name: &str) -> String {
    let mut out = String::from("sym_");
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            out.push(ch);
        } else {
            let _ = write!(out, "u{:x}", ch as u32);
        }
    }
    out
}

fn py_string(s: &str) -> String {
    let escaped = s.replace('\\', "\\\\").replace('"', "\\\"");
    format!("\"{escaped}\"")
}

pub fn class_name(scene_number: u32) -> String {
    format!("Scene{scene_number}")
}

/// Renders a complete scene script.
pub fn render_script(
    scene_number: u32,
    goal: &str,
    layout_hints: &[String],
    events: &[ScriptEvent],
    scene_duration_s: f64,
) -> String {
    let mut s = String::new();
    s.push_str("from manim import *\n\n\n");
    s.push_str("def _wait_until(scene, t):\n");
    s.push_str("    scene.wait(max(0.0, t - scene.renderer.time))\n\n\n");
    let _ = writeln!(s, "class {}(Scene):", class_name(scene_number));
    let _ = writeln!(s, "    \"\"\"{}\"\"\"", goal.replace('"', "'"));
    s.push('\n');
    s.push_str("    def construct(self):\n");
    for hint in layout_hints {
        let _ = writeln!(s, "        # layout: {hint}");
    }
    let mut created: BTreeSet<&str> = BTreeSet::new();
    for (i, ev) in events.iter().enumerate() {
        let symbols = if ev.symbols.is_empty() { String::new() } else { format!(" {}", ev.symbols.join(" ")) };
        let _ = writeln!(
            s,
            "        # @event {} {} {} {}{}",
            ev.id,
            ev.kind.as_str(),
            format_seconds(ev.start_s),
            format_seconds(ev.duration_s),
            symbols
        );
        if let Some(cue) = &ev.bound_cue {
            let _ = writeln!(s, "        # @bind {cue} {}", ev.id);
        }
        let _ = writeln!(s, "        _wait_until(self, {})", format_seconds(ev.start_s));
        let run_time = format_seconds(ev.duration_s);
        let mut fresh = Vec::new();
        for sym in &ev.symbols {
            if created.insert(sym.as_str()) {
                let ident = symbol_ident(sym);
                let _ = writeln!(
                    s,
                    "        {ident} = MathTex(r\"{}\").shift({} * RIGHT)",
                    symbol_tex(sym),
                    created.len() as i32 * 2 - 4
                );
                fresh.push(ident);
            }
        }
        let targets: Vec<String> = ev.symbols.iter().map(|n| symbol_ident(n)).collect();
        match ev.kind {
            EventKind::Add => {
                let list = if targets.is_empty() { "Dot()".to_string() } else { targets.join(", ") };
                let _ = writeln!(s, "        self.play(FadeIn({list}), run_time={run_time})");
            }
            EventKind::Highlight | EventKind::Transform | EventKind::Remove => {
                if !fresh.is_empty() && ev.kind != EventKind::Remove {
                    let _ = writeln!(s, "        self.add({})", fresh.join(", "));
                }
                let anims: Vec<String> = if targets.is_empty() {
                    vec!["Indicate(Dot())".to_string()]
                } else {
                    targets
                        .iter()
                        .map(|t| match ev.kind {
                            EventKind::Highlight => format!("Indicate({t})"),
                            EventKind::Transform => format!("{t}.animate.scale(1.3)"),
                            _ => format!("FadeOut({t})"),
                        })
                        .collect()
                };
                let _ = writeln!(s, "        self.play({}, run_time={run_time})", anims.join(", "));
            }
            EventKind::Annotate => {
                let var = format!("note_{i}");
                let _ = writeln!(
                    s,
                    "        {var} = Text({}, font_size=28).to_edge(DOWN)",
                    py_string(&ev.note)
                );
                let _ = writeln!(s, "        self.play(Write({var}), run_time={run_time})");
                let _ = writeln!(s, "        self.remove({var})");
            }
        }
    }
    let _ = writeln!(s, "        _wait_until(self, {})", format_seconds(scene_duration_s));
    s
}

/// Rewrites the start time of `event_id` in both its annotation and the
/// `_wait_until` call of its block. Returns `None` if the event is absent.
pub fn rewrite_event_start(script: &str, event_id: &str, new_start: f64) -> Option<String> {
    let mut out = Vec::new();
    let mut found = false;
    let mut in_block = false;
    for line in script.lines() {
        let trimmed = line.trim_start();
        let indent = &line[..line.len() - trimmed.len()];
        if let Some(rest) = trimmed.strip_prefix("# @event ") {
            let mut fields: Vec<&str> = rest.split_whitespace().collect();
            in_block = fields.first() == Some(&event_id);
            if in_block && fields.len() >= 4 {
                found = true;
                let t = format_seconds(new_start);
                fields[2] = &t;
                out.push(format!("{indent}# @event {}", fields.join(" ")));
                continue;
            }
        } else if in_block && trimmed.starts_with("_wait_until(self,") {
            out.push(format!("{indent}_wait_until(self, {})", format_seconds(new_start)));
            in_block = false;
            continue;
        }
        out.push(line.to_string());
    }
    if !found {
        return None;
    }
    let mut joined = out.join("\n");
    if script.ends_with('\n') {
        joined.push('\n');
    }
    Some(joined)
}

/// Extracts `(line_number, module)` for every import statement.
pub fn imports(script: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (i, line) in script.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("import ") {
            for part in rest.split(',') {
                let module = part.split_whitespace().next().unwrap_or("");
                out.push((i + 1, root_module(module)));
            }
        } else if let Some(rest) = t.strip_prefix("from ") {
            let module = rest.split_whitespace().next().unwrap_or("");
            out.push((i + 1, root_module(module)));
        }
    }
    out
}

fn root_module(m: &str) -> String {
    m.split('.').next().unwrap_or(m).to_string()
}

/// Raw-string LaTeX fragments passed to `MathTex`/`Tex`, with line numbers.
pub fn latex_fragments(script: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (i, line) in script.lines().enumerate() {
        let mut rest = line;
        while let Some(pos) = rest.find("Tex(") {
            rest = &rest[pos + 4..];
            let body = rest.trim_start_matches('r');
            let Some(quote) = body.chars().next().filter(|c| *c == '"' || *c == '\'') else {
                continue;
            };
            let inner = &body[1..];
            match inner.find(quote) {
                Some(end) => {
                    out.push((i + 1, inner[..end].to_string()));
                    rest = &inner[end + 1..];
                }
                None => {
                    out.push((i + 1, inner.to_string()));
                    break;
                }
            }
        }
    }
    out
}
