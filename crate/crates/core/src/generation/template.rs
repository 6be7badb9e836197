use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What a template produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Plan,
    Narration,
    Code,
}

/// Upper bound on decoding temperature for code templates.
pub const MAX_CODE_TEMPERATURE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub version: String,
    pub kind: TemplateKind,
    pub slots: Vec<String>,
    pub body: String,
    pub decode_params: DecodeParams,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemplateError {
    #[error("missing value for slot `{0}`")]
    MissingSlot(String),
    #[error("template `{template}` uses placeholder `{placeholder}` that is not a declared slot")]
    UndeclaredPlaceholder { template: String, placeholder: String },
    #[error("template `{template}`: unbalanced brace at byte {position}")]
    UnbalancedBrace { template: String, position: usize },
    #[error("template `{template}`: temperature {temperature} is out of range")]
    BadTemperature { template: String, temperature: f64 },
}

enum Piece<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

fn is_slot_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Splits a body into literals and `{slot}` placeholders. `{{` and `}}`
/// stand for literal braces.
fn tokenize(body: &str) -> Result<Vec<Piece<'_>>, usize> {
    let mut out = Vec::new();
    let bytes = body.as_bytes();
    let mut i = 0;
    let mut lit_start = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push(Piece::Literal(&body[lit_start..i + 1]));
                i += 2;
                lit_start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push(Piece::Literal(&body[lit_start..i + 1]));
                i += 2;
                lit_start = i;
            }
            b'{' => {
                let close = body[i + 1..].find('}').ok_or(i)? + i + 1;
                let name = &body[i + 1..close];
                if !is_slot_name(name) {
                    return Err(i);
                }
                out.push(Piece::Literal(&body[lit_start..i]));
                out.push(Piece::Placeholder(name));
                i = close + 1;
                lit_start = i;
            }
            b'}' => return Err(i),
            _ => i += 1,
        }
    }
    out.push(Piece::Literal(&body[lit_start..]));
    Ok(out)
}

impl PromptTemplate {
    /// Creates a template after checking its placeholders and decoding limits.
    pub fn new(
        template_id: impl Into<String>,
        version: impl Into<String>,
        kind: TemplateKind,
        slots: &[&str],
        body: impl Into<String>,
        decode_params: DecodeParams,
    ) -> Result<Self, TemplateError> {
        let t = Self {
            template_id: template_id.into(),
            version: version.into(),
            kind,
            slots: slots.iter().map(|s| s.to_string()).collect(),
            body: body.into(),
            decode_params,
        };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), TemplateError> {
        let temp = self.decode_params.temperature;
        let limit = if self.kind == TemplateKind::Code { MAX_CODE_TEMPERATURE } else { 1.0 };
        if !(0.0..=limit).contains(&temp) {
            return Err(TemplateError::BadTemperature { template: self.template_id.clone(), temperature: temp });
        }
        let declared: BTreeSet<&str> = self.slots.iter().map(String::as_str).collect();
        let pieces = tokenize(&self.body).map_err(|position| TemplateError::UnbalancedBrace {
            template: self.template_id.clone(),
            position,
        })?;
        for p in pieces {
            if let Piece::Placeholder(name) = p {
                if !declared.contains(name) {
                    return Err(TemplateError::UndeclaredPlaceholder {
                        template: self.template_id.clone(),
                        placeholder: name.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn placeholders(&self) -> Vec<String> {
        tokenize(&self.body)
            .map(|ps| {
                ps.into_iter()
                    .filter_map(|p| match p {
                        Piece::Placeholder(n) => Some(n.to_string()),
                        Piece::Literal(_) => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Substitutes slot values in a single pass. Values are inserted verbatim,
/// so placeholder syntax inside a value is never expanded.
pub fn render_prompt(template: &PromptTemplate, slot_values: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    for slot in &template.slots {
        if !slot_values.contains_key(slot) {
            return Err(TemplateError::MissingSlot(slot.clone()));
        }
    }
    let pieces = tokenize(&template.body).map_err(|position| TemplateError::UnbalancedBrace {
        template: template.template_id.clone(),
        position,
    })?;
    let mut out = String::with_capacity(template.body.len());
    for p in pieces {
        match p {
            Piece::Literal(s) => out.push_str(s),
            Piece::Placeholder(name) => match slot_values.get(name) {
                Some(v) => out.push_str(v),
                None => return Err(TemplateError::MissingSlot(name.to_string())),
            },
        }
    }
    Ok(out)
}

pub const PLAN_SLOTS: &[&str] = &[
    "topic",
    "audience",
    "objective",
    "target_duration_s",
    "scene_count",
    "notes",
    "repair_context",
];

pub const SCENE_SLOTS: &[&str] = &[
    "topic",
    "audience",
    "scene_id",
    "goal",
    "goal_keywords",
    "cue_plan",
    "storyboard",
    "symbols",
    "allowed_primitives",
    "layout_hints",
    "planned_duration_s",
    "repair_context",
];

const PLAN_BODY: &str = "\
You are planning a short narrated animation lesson for {audience} learners.
Topic: {topic}
Learning objective: {objective}
Notes: {notes}
Split about {target_duration_s} seconds into exactly {scene_count} scenes.
For every scene give: a goal, goal keywords (include the symbols the key step shows),
one storyboard frame per narration cue, allowed primitives (add, highlight, transform,
annotate, remove) and layout hints. List every symbol once with meaning, SI unit
expression and assumptions. Answer with a single JSON object {{\"scenes\": [...], \"symbols\": [...]}}.
{repair_context}";

const NARRATION_BODY: &str = "\
Write the narration for scene {scene_id} of a lesson on {topic} ({audience} level).
Scene goal: {goal}
Goal keywords that must be spoken: {goal_keywords}
Symbols (name | meaning | unit), wrap each mention in dollar signs:
{symbols}
Cue plan, one sentence per cue, prefix each with [[cue:ID @ SECONDS]]:
{cue_plan}
Storyboard:
{storyboard}
Planned duration: {planned_duration_s} s.
{repair_context}";

const CODE_BODY: &str = "\
Write a Manim scene for scene {scene_id} of a lesson on {topic}.
Scene goal: {goal}
Use only these primitives: {allowed_primitives}
Layout hints: {layout_hints}
Symbols (name | meaning | unit):
{symbols}
Key symbols to highlight or transform: {goal_keywords}
For every cue below emit one event block annotated as
# @event <id> <kind> <start> <duration> [symbols...] and # @bind <cue> <event>:
{cue_plan}
Storyboard:
{storyboard}
The scene lasts {planned_duration_s} s. Import only from manim, numpy, math or random.
{repair_context}";

/// The plan, narration and code templates used by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub plan: PromptTemplate,
    pub narration: PromptTemplate,
    pub code: PromptTemplate,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            plan: PromptTemplate::new(
                "plan",
                "plan-v1",
                TemplateKind::Plan,
                PLAN_SLOTS,
                PLAN_BODY,
                DecodeParams { temperature: 0.5, max_output_tokens: 4096 },
            )
            .expect("builtin plan template"),
            narration: PromptTemplate::new(
                "narration",
                "narration-v1",
                TemplateKind::Narration,
                SCENE_SLOTS,
                NARRATION_BODY,
                DecodeParams { temperature: 0.6, max_output_tokens: 2048 },
            )
            .expect("builtin narration template"),
            code: PromptTemplate::new(
                "code",
                "code-v1",
                TemplateKind::Code,
                SCENE_SLOTS,
                CODE_BODY,
                DecodeParams { temperature: 0.2, max_output_tokens: 4096 },
            )
            .expect("builtin code template"),
        }
    }

    pub fn for_kind(&self, kind: TemplateKind) -> &PromptTemplate {
        match kind {
            TemplateKind::Plan => &self.plan,
            TemplateKind::Narration => &self.narration,
            TemplateKind::Code => &self.code,
        }
    }

    pub fn versions(&self) -> BTreeMap<String, String> {
        [&self.plan, &self.narration, &self.code]
            .into_iter()
            .map(|t| (t.template_id.clone(), t.version.clone()))
            .collect()
    }

    pub fn check(&self) -> Result<(), TemplateError> {
        self.plan.check()?;
        self.narration.check()?;
        self.code.check()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goal_template() -> PromptTemplate {
        PromptTemplate::new(
            "t",
            "1",
            TemplateKind::Narration,
            &["goal"],
            "Goal: {goal}",
            DecodeParams { temperature: 0.5, max_output_tokens: 10 },
        )
        .unwrap()
    }

    fn values(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn substitutes() {
        let out = render_prompt(&goal_template(), &values(&[("goal", "eigenvectors")])).unwrap();
        assert_eq!(out, "Goal: eigenvectors");
    }

    #[test]
    fn missing_slot() {
        assert_eq!(
            render_prompt(&goal_template(), &BTreeMap::new()),
            Err(TemplateError::MissingSlot("goal".into()))
        );
    }

    #[test]
    fn values_are_not_expanded_again() {
        let out = render_prompt(&goal_template(), &values(&[("goal", "{goal} and {{x}}")])).unwrap();
        assert_eq!(out, "Goal: {goal} and {{x}}");
    }

    #[test]
    fn escaped_braces_and_stability() {
        let t = PromptTemplate::new(
            "t",
            "1",
            TemplateKind::Plan,
            &["a"],
            "{{\"k\": {a}}}",
            DecodeParams { temperature: 0.0, max_output_tokens: 1 },
        )
        .unwrap();
        let v = values(&[("a", "1")]);
        let first = render_prompt(&t, &v).unwrap();
        assert_eq!(first, "{\"k\": 1}");
        assert_eq!(render_prompt(&t, &v).unwrap(), first);
    }

    #[test]
    fn load_time_checks() {
        let hot = PromptTemplate::new(
            "c",
            "1",
            TemplateKind::Code,
            &[],
            "x",
            DecodeParams { temperature: 0.31, max_output_tokens: 1 },
        );
        assert!(matches!(hot, Err(TemplateError::BadTemperature { .. })));
        let undeclared = PromptTemplate::new(
            "n",
            "1",
            TemplateKind::Narration,
            &["a"],
            "{b}",
            DecodeParams { temperature: 0.3, max_output_tokens: 1 },
        );
        assert!(matches!(undeclared, Err(TemplateError::UndeclaredPlaceholder { .. })));
        let dangling = PromptTemplate::new(
            "n",
            "1",
            TemplateKind::Narration,
            &["a"],
            "{a",
            DecodeParams { temperature: 0.3, max_output_tokens: 1 },
        );
        assert!(matches!(dangling, Err(TemplateError::UnbalancedBrace { .. })));
    }

    #[test]
    fn builtin_set_is_valid() {
        let set = TemplateSet::builtin();
        set.check().unwrap();
        assert!(set.code.decode_params.temperature <= MAX_CODE_TEMPERATURE);
        assert!(set.narration.placeholders().contains(&"repair_context".to_string()));
    }
}
