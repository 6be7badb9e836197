//! Seeded fault corpora. Each function damages one draft in a way that only
//! one check should notice.

use serde::{Deserialize, Serialize};

use crate::generation::{DraftArtifact, ScenePair, Track};
use crate::plan::{SceneId, ScenePlan, SymbolLedger};
use crate::script::rewrite_event_start;
use crate::sync::{parse_events, split_symbol_token};
use crate::units::parse_unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    ForbiddenImport,
    Drift,
    UnitMismatch,
    MissingKeyword,
}

impl Fault {
    pub const ALL: [Fault; 4] = [Fault::ForbiddenImport, Fault::Drift, Fault::UnitMismatch, Fault::MissingKeyword];

    pub fn as_str(self) -> &'static str {
        match self {
            Fault::ForbiddenImport => "forbidden_import",
            Fault::Drift => "drift",
            Fault::UnitMismatch => "unit_mismatch",
            Fault::MissingKeyword => "missing_keyword",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }

    /// Track the fault is planted in.
    pub fn track(self) -> Track {
        match self {
            Fault::MissingKeyword => Track::Narration,
            _ => Track::Code,
        }
    }
}

pub const DRIFT_SHIFT_S: f64 = 1.2;

/// Adds `import os` after the first import line.
pub fn forbidden_import(script: &str) -> String {
    match script.find('\n') {
        Some(i) => format!("{}\nimport os{}", &script[..i], &script[i..]),
        None => format!("import os\n{script}"),
    }
}

/// Delays the first bound event by [`DRIFT_SHIFT_S`].
pub fn drift(script: &str) -> Option<String> {
    let (events, bindings) = parse_events(script, SceneId(0)).ok()?;
    let bound = bindings.first()?;
    let ev = events.iter().find(|e| e.event_id == bound.event_id)?;
    rewrite_event_start(script, &ev.event_id, ev.start_s + DRIFT_SHIFT_S)
}

/// Tags the first registered event symbol with a unit of the wrong dimension.
pub fn unit_mismatch(script: &str, ledger: &SymbolLedger) -> Option<String> {
    let mut done = false;
    let lines: Vec<String> = script
        .lines()
        .map(|line| {
            if done {
                return line.to_string();
            }
            let trimmed = line.trim_start();
            let Some(rest) = trimmed.strip_prefix("# @event ") else { return line.to_string() };
            let mut f: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            for tok in f.iter_mut().skip(4) {
                let (name, unit) = split_symbol_token(tok);
                let Some(entry) = ledger.get(name) else { continue };
                if unit.is_some() {
                    continue;
                }
                let wrong = if Ok(entry.dimension) == parse_unit("m") { "s" } else { "m" };
                *tok = format!("{name}:{wrong}");
                done = true;
                break;
            }
            let indent = &line[..line.len() - trimmed.len()];
            format!("{indent}# @event {}", f.join(" "))
        })
        .collect();
    if !done {
        return None;
    }
    let mut out = lines.join("\n");
    if script.ends_with('\n') {
        out.push('\n');
    }
    Some(out)
}

/// Replaces every whole-word occurrence of the first goal keyword that is
/// not a ledger symbol.
pub fn missing_keyword(narration: &str, scene: &ScenePlan, ledger: &SymbolLedger) -> Option<String> {
    let kw = scene.goal_keywords.iter().map(|k| k.trim()).find(|k| !k.is_empty() && ledger.get(k).is_none())?;
    let lower_kw = kw.to_lowercase();
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let mut out = String::with_capacity(narration.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if word.to_lowercase() == lower_kw {
            out.push_str("that");
        } else {
            out.push_str(word);
        }
        word.clear();
    };
    for c in narration.chars() {
        if is_word(c) {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    (out != narration).then_some(out)
}

/// Plants `fault` in the scene pair. The damaged artifact keeps its version
/// and provenance, as if the backend had produced it.
pub fn inject(
    fault: Fault,
    pair: &ScenePair,
    scene: &ScenePlan,
    ledger: &SymbolLedger,
) -> Option<ScenePair> {
    let damaged = match fault {
        Fault::ForbiddenImport => Some(forbidden_import(&pair.code.content)),
        Fault::Drift => drift(&pair.code.content),
        Fault::UnitMismatch => unit_mismatch(&pair.code.content, ledger),
        Fault::MissingKeyword => missing_keyword(&pair.narration.content, scene, ledger),
    }?;
    let mut out = pair.clone();
    let target: &mut DraftArtifact = match fault.track() {
        Track::Narration => &mut out.narration,
        Track::Code => &mut out.code,
    };
    target.content = damaged;
    Some(out)
}
