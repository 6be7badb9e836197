//! Offline backend with canned lesson content for a few topics.
//!
//! Output depends only on the template kind, the slot values and the seed.
//! Unknown topics fall back to generic content built from the topic title.

use std::collections::BTreeMap;

use super::{
    BackendCall, BackendError, Completion, GeneratorBackend, PlanProposal, SceneProposal, SymbolProposal,
    TemplateKind,
};
use crate::script::{format_seconds, render_script, EventKind, ScriptEvent};

struct Beat {
    frame: &'static str,
    text: &'static str,
    kind: EventKind,
    symbols: &'static [&'static str],
}

struct SceneSpec {
    goal: &'static str,
    keywords: &'static [&'static str],
    layout: &'static [&'static str],
    beats: [Beat; 3],
}

struct Topic {
    symbols: &'static [(&'static str, &'static str, &'static str)],
    scenes: &'static [SceneSpec; 7],
}

const fn beat(frame: &'static str, text: &'static str, kind: EventKind, symbols: &'static [&'static str]) -> Beat {
    Beat { frame, text, kind, symbols }
}

use EventKind::{Add, Annotate, Highlight, Transform};

const GRID: &[&str] = &["grid centered", "labels above arrows"];
const LINE: &[&str] = &["number line along the bottom", "formulas top right"];

static LINEAR: Topic = Topic {
    symbols: &[
        ("x", "input vector", "1"),
        ("e1", "first basis vector", "1"),
        ("e2", "second basis vector", "1"),
        ("T", "linear transformation", "1"),
        ("M", "matrix of the transformation", "1"),
    ],
    scenes: &[
        SceneSpec {
            goal: "See vectors as arrows built from the basis vectors",
            keywords: &["vector", "basis", "e1"],
            layout: GRID,
            beats: [
                beat("Grid with the origin and an arrow x", "Every vector $x$ is an arrow that starts at the origin of the grid.", Add, &["x"]),
                beat("Unit arrows e1 and e2 along the axes", "The basis vectors $e1$ and $e2$ point one step along each axis.", Add, &["e1", "e2"]),
                beat("x split into steps along e1 and e2", "We highlight $e1$ because any arrow is a combination of basis steps.", Highlight, &["e1"]),
            ],
        },
        SceneSpec {
            goal: "Define a linear transformation T as a rule that moves every vector",
            keywords: &["transformation", "T", "grid"],
            layout: GRID,
            beats: [
                beat("Grid before any motion", "A transformation $T$ takes each input vector and moves it somewhere new.", Add, &["T"]),
                beat("Grid lines warp but stay straight", "For a linear map the grid lines stay straight and evenly spaced.", Annotate, &[]),
                beat("T acting on the whole grid", "Watch $T$ move the whole grid at once while the origin stays fixed.", Transform, &["T"]),
            ],
        },
        SceneSpec {
            goal: "Track where T sends the basis vectors",
            keywords: &["basis", "image", "e2"],
            layout: GRID,
            beats: [
                beat("e1 and e2 before T", "To know $T$ we only need the image of each basis vector.", Add, &["e1", "e2"]),
                beat("e2 moves to a new arrow", "Here $e2$ lands on a new arrow, and that arrow is its image.", Transform, &["e2"]),
                beat("Images of e1 and e2 labelled", "Label both images so we can reuse them in the next step.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Collect the images as the columns of the matrix M",
            keywords: &["matrix", "columns", "M"],
            layout: GRID,
            beats: [
                beat("Two image arrows side by side", "Write the two images as columns side by side.", Add, &[]),
                beat("Columns framed as a matrix M", "Those columns form the matrix $M$ that records $T$.", Highlight, &["M"]),
                beat("M placed next to the grid", "The matrix $M$ is a compact description of the whole map.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Compute M x as a combination of the columns",
            keywords: &["combination", "columns", "x"],
            layout: GRID,
            beats: [
                beat("x written with coordinates", "Take a vector $x$ with two coordinates.", Add, &["x"]),
                beat("Scaled columns added tip to tail", "Then $M$ times $x$ is a combination of the columns weighted by those coordinates.", Transform, &["x"]),
                beat("Result arrow matches T of x", "The result is exactly where $T$ sends $x$.", Highlight, &["T"]),
            ],
        },
        SceneSpec {
            goal: "Compose two transformations by multiplying matrices",
            keywords: &["composition", "product", "M"],
            layout: GRID,
            beats: [
                beat("Two grids applied one after another", "Applying one map after another is called composition.", Annotate, &[]),
                beat("Product matrix replaces two steps", "The product of the two matrices gives one matrix $M$ for both steps.", Transform, &["M"]),
                beat("Order of the product highlighted", "Order matters, so the product reads from right to left.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Summarize how a matrix encodes a linear transformation",
            keywords: &["summary", "matrix", "T"],
            layout: GRID,
            beats: [
                beat("Recap of basis arrows", "In summary, a linear map is fixed by where the basis arrows land.", Add, &["e1", "e2"]),
                beat("T highlighted beside its matrix", "The transformation $T$ and its matrix $M$ carry the same information.", Highlight, &["T", "M"]),
                beat("Closing grid", "Keep picturing the moving grid whenever you see a matrix.", Annotate, &[]),
            ],
        },
    ],
};

static EIGEN: Topic = Topic {
    symbols: &[
        ("A", "matrix acting on the plane", "1"),
        ("x", "arbitrary vector", "1"),
        ("v", "eigenvector", "1"),
        ("λ", "eigenvalue", "1"),
    ],
    scenes: &[
        SceneSpec {
            goal: "Notice that most vectors change direction under A",
            keywords: &["direction", "A", "vector"],
            layout: GRID,
            beats: [
                beat("Grid with a matrix A", "Start with a matrix $A$ acting on the plane.", Add, &["A"]),
                beat("Several arrows rotate off their lines", "Most arrows, like $x$, get knocked off their original direction.", Transform, &["x"]),
                beat("A highlighted as the cause", "The matrix $A$ is what turns each vector.", Highlight, &["A"]),
            ],
        },
        SceneSpec {
            goal: "Find the special vectors v that stay on their own line",
            keywords: &["eigenvector", "line", "v"],
            layout: GRID,
            beats: [
                beat("One arrow stays on its span", "Some special arrows, like $v$, stay on their own line.", Add, &["v"]),
                beat("v highlighted on its span", "Such a $v$ is called an eigenvector of $A$.", Highlight, &["v"]),
                beat("Span line drawn through v", "Its span through the origin is left in place.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Measure the scaling factor λ along the eigenvector",
            keywords: &["eigenvector", "scaling", "λ"],
            layout: GRID,
            beats: [
                beat("v before and after A", "Along an eigenvector, $A$ only stretches or shrinks.", Add, &["v"]),
                beat("Stretch factor λ highlighted", "The scaling factor is the eigenvalue $λ$.", Highlight, &["λ"]),
                beat("Equation A v = λ v", "So $A$ times $v$ equals $λ$ times $v$.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Turn the eigen equation into a determinant condition",
            keywords: &["determinant", "zero", "λ"],
            layout: GRID,
            beats: [
                beat("A minus λ times identity", "Move everything to one side to get $A$ minus $λ$ times the identity.", Add, &["A", "λ"]),
                beat("Determinant set to zero", "A nonzero solution exists only when the determinant is zero.", Transform, &["λ"]),
                beat("Characteristic polynomial", "That condition is a polynomial equation in $λ$.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Solve for each eigenvalue λ and its eigenvector",
            keywords: &["roots", "eigenvalue", "λ"],
            layout: GRID,
            beats: [
                beat("Polynomial with its roots marked", "The roots of the polynomial are the eigenvalues.", Add, &[]),
                beat("Each root λ plugged back in", "Plug each eigenvalue $λ$ back in to solve for its eigenvector.", Transform, &["λ"]),
                beat("Eigenvector found for each root", "Each root gives its own line of eigenvectors $v$.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Use eigenvectors v as a basis where A only scales",
            keywords: &["basis", "diagonal", "v"],
            layout: GRID,
            beats: [
                beat("Two eigenvector lines as axes", "Two independent eigenvectors $v$ can serve as a new basis.", Add, &["v"]),
                beat("A acts by pure scaling", "In that basis, $A$ only scales each axis.", Transform, &["v"]),
                beat("Diagonal matrix appears", "The matrix becomes diagonal with the eigenvalues on it.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Summarize eigenvectors and eigenvalues",
            keywords: &["summary", "eigenvalue", "λ"],
            layout: GRID,
            beats: [
                beat("Recap arrow on its line", "In summary, an eigenvector $v$ keeps its direction under $A$.", Add, &["v"]),
                beat("λ highlighted as the stretch", "The eigenvalue $λ$ says how much it stretches.", Highlight, &["λ"]),
                beat("Closing grid", "Look for these special lines whenever a matrix acts.", Annotate, &[]),
            ],
        },
    ],
};

static KINEMATICS: Topic = Topic {
    symbols: &[
        ("x", "position", "m"),
        ("t", "time", "s"),
        ("v", "velocity", "m/s"),
        ("a", "acceleration", "m/s^2"),
        ("g", "gravitational acceleration", "m/s^2"),
    ],
    scenes: &[
        SceneSpec {
            goal: "Describe motion with position x and time t",
            keywords: &["position", "time", "x"],
            layout: LINE,
            beats: [
                beat("Number line with a moving dot", "We describe motion by the position $x$ of an object.", Add, &["x"]),
                beat("Clock showing t", "Position changes as the time $t$ runs forward.", Add, &["t"]),
                beat("x highlighted over time", "Highlight $x$ to follow the object along the line.", Highlight, &["x"]),
            ],
        },
        SceneSpec {
            goal: "Define velocity v as the rate of change of position",
            keywords: &["velocity", "rate", "v"],
            layout: LINE,
            beats: [
                beat("Two positions a moment apart", "Compare two positions $x$ a short time apart.", Add, &["x"]),
                beat("v arrow on the dot", "The velocity $v$ is the rate at which position changes.", Highlight, &["v"]),
                beat("Units of v", "It is measured in meters per second.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Define acceleration a as the rate of change of velocity",
            keywords: &["acceleration", "velocity", "a"],
            layout: LINE,
            beats: [
                beat("v arrow growing", "When the velocity $v$ grows, the object speeds up.", Add, &["v"]),
                beat("a highlighted", "The acceleration $a$ measures how fast $v$ changes.", Highlight, &["a"]),
                beat("Units of a", "Its unit is meters per second squared.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Relate velocity and time under constant acceleration",
            keywords: &["constant", "linear", "v"],
            layout: LINE,
            beats: [
                beat("Velocity-time graph axes", "Plot velocity against the time $t$.", Add, &["t"]),
                beat("Straight line v = a t", "With constant acceleration, $v$ equals $a$ times $t$.", Transform, &["v"]),
                beat("Slope labelled a", "The slope of that linear graph is the acceleration.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Find displacement as the area under the velocity graph",
            keywords: &["area", "displacement", "x"],
            layout: LINE,
            beats: [
                beat("Shaded triangle under the line", "The area under the velocity graph is the displacement.", Add, &[]),
                beat("x grows as a parabola", "So $x$ grows with the square of $t$ when starting from rest.", Transform, &["x"]),
                beat("Half a t squared", "The area is one half $a$ times $t$ squared.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Apply the model to free fall with g",
            keywords: &["free", "fall", "g"],
            layout: LINE,
            beats: [
                beat("Ball dropped from a ledge", "A dropped ball is in free fall.", Add, &[]),
                beat("g highlighted as the acceleration", "Its acceleration is $g$, about nine point eight meters per second squared.", Highlight, &["g"]),
                beat("Position markers every second", "The gaps between markers grow every second.", Annotate, &[]),
            ],
        },
        SceneSpec {
            goal: "Summarize position, velocity and acceleration",
            keywords: &["summary", "velocity", "a"],
            layout: LINE,
            beats: [
                beat("x, v and a side by side", "In summary, $x$ tells where, $v$ tells how fast, and $a$ tells how $v$ changes.", Add, &["x", "v", "a"]),
                beat("a highlighted as the driver", "The acceleration $a$ drives every change in velocity.", Highlight, &["a"]),
                beat("Closing motion", "These three ideas describe any straight line motion.", Annotate, &[]),
            ],
        },
    ],
};

/// Owned beat, so generic topics can be built at runtime.
#[derive(Debug, Clone)]
struct OwnedBeat {
    frame: String,
    text: String,
    kind: EventKind,
    symbols: Vec<String>,
}

#[derive(Debug, Clone)]
struct OwnedScene {
    goal: String,
    keywords: Vec<String>,
    layout: Vec<String>,
    beats: Vec<OwnedBeat>,
}

#[derive(Debug, Clone)]
struct Library {
    symbols: Vec<SymbolProposal>,
    scenes: Vec<OwnedScene>,
}

fn from_static(topic: &Topic) -> Library {
    let scenes: Vec<OwnedScene> = topic
        .scenes
        .iter()
        .map(|s| OwnedScene {
            goal: s.goal.into(),
            keywords: s.keywords.iter().map(|k| k.to_string()).collect(),
            layout: s.layout.iter().map(|k| k.to_string()).collect(),
            beats: s
                .beats
                .iter()
                .map(|b| OwnedBeat {
                    frame: b.frame.into(),
                    text: b.text.into(),
                    kind: b.kind,
                    symbols: b.symbols.iter().map(|k| k.to_string()).collect(),
                })
                .collect(),
        })
        .collect();
    // A symbol is introduced in the first library scene whose beats use it.
    let symbols = topic
        .symbols
        .iter()
        .map(|(name, meaning, unit)| {
            let first = scenes
                .iter()
                .position(|s| s.beats.iter().any(|b| b.symbols.iter().any(|x| x == name)))
                .unwrap_or(0);
            SymbolProposal {
                name: name.to_string(),
                meaning: meaning.to_string(),
                unit_expr: unit.to_string(),
                assumptions: vec![],
                introduced_in_scene: first as u32 + 1,
            }
        })
        .collect();
    Library { symbols, scenes }
}

fn generic(title: &str) -> Library {
    let word = title
        .split(|c: char| !c.is_alphanumeric())
        .find(|w| w.chars().count() >= 3)
        .map(str::to_lowercase)
        .unwrap_or_else(|| "idea".into());
    let scenes = (1..=7)
        .map(|k| {
            let summary = k == 7;
            let goal = if summary {
                format!("Summarize the key ideas of {title}")
            } else {
                format!("Explain key idea {k} of {title}")
            };
            OwnedScene {
                goal,
                keywords: vec![word.clone(), "x".into()],
                layout: vec!["main figure centered".into()],
                beats: vec![
                    OwnedBeat {
                        frame: format!("Part {k}: title card for {title}"),
                        text: format!("In part {k} we look at {title} through the quantity $x$."),
                        kind: Add,
                        symbols: vec!["x".into()],
                    },
                    OwnedBeat {
                        frame: format!("Part {k}: x highlighted"),
                        text: format!("Watch how $x$ behaves in this step of {title}."),
                        kind: Highlight,
                        symbols: vec!["x".into()],
                    },
                    OwnedBeat {
                        frame: format!("Part {k}: takeaway note"),
                        text: if summary {
                            "That is the whole story in brief.".into()
                        } else {
                            "Keep this picture in mind for the next part.".into()
                        },
                        kind: Annotate,
                        symbols: vec![],
                    },
                ],
            }
        })
        .collect();
    Library {
        symbols: vec![SymbolProposal {
            name: "x".into(),
            meaning: format!("central quantity of {title}"),
            unit_expr: "1".into(),
            assumptions: vec![],
            introduced_in_scene: 1,
        }],
        scenes,
    }
}

fn library(topic: &str) -> Library {
    let t = topic.to_lowercase();
    if t.contains("eigen") {
        from_static(&EIGEN)
    } else if t.contains("linear transformation") || t.contains("linear map") {
        from_static(&LINEAR)
    } else if t.contains("kinematic") || t.contains("motion") {
        from_static(&KINEMATICS)
    } else {
        generic(topic)
    }
}

/// Library scenes used for an `n`-scene plan: the first `n - 1` and the summary.
fn pick_scenes(lib: &Library, n: usize) -> Vec<&OwnedScene> {
    let last = lib.scenes.len() - 1;
    (0..n)
        .map(|i| if i + 1 == n { &lib.scenes[last] } else { &lib.scenes[i.min(last - 1)] })
        .collect()
}

const FILLERS: &[&str] = &["", "Now, ", "Next, ", "Here, "];

fn with_filler(text: &str, seed: u64, k: usize) -> String {
    let filler = FILLERS[((seed % FILLERS.len() as u64) as usize + k) % FILLERS.len()];
    if k == 0 || filler.is_empty() {
        return text.to_string();
    }
    let mut chars = text.chars();
    let first = chars.next().map(|c| c.to_ascii_lowercase()).unwrap_or_default();
    format!("{filler}{first}{}", chars.as_str())
}

fn slot<'a>(slots: &'a BTreeMap<String, String>, name: &str) -> Result<&'a str, BackendError> {
    slots
        .get(name)
        .map(String::as_str)
        .ok_or_else(|| BackendError::Malformed(format!("slot `{name}` missing")))
}

fn parse_num<T: std::str::FromStr>(slots: &BTreeMap<String, String>, name: &str) -> Result<T, BackendError> {
    slot(slots, name)?
        .trim()
        .parse()
        .map_err(|_| BackendError::Malformed(format!("slot `{name}` is not a number")))
}

/// `(cue_id, mark)` pairs from the `cue_plan` slot.
fn cue_plan(slots: &BTreeMap<String, String>) -> Result<Vec<(String, f64)>, BackendError> {
    slot(slots, "cue_plan")?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (id, t) = l.split_once(" @ ").ok_or_else(|| BackendError::Malformed(format!("cue line `{l}`")))?;
            let t = t.trim().parse().map_err(|_| BackendError::Malformed(format!("cue line `{l}`")))?;
            Ok((id.trim().to_string(), t))
        })
        .collect()
}

fn storyboard(slots: &BTreeMap<String, String>) -> Result<Vec<String>, BackendError> {
    Ok(slot(slots, "storyboard")?
        .lines()
        .filter_map(|l| l.strip_prefix("- "))
        .map(str::to_string)
        .collect())
}

fn split_list(s: &str, sep: char) -> Vec<String> {
    s.split(sep).map(str::trim).filter(|x| !x.is_empty()).map(str::to_string).collect()
}

/// Finds the library beat for a storyboard frame, or builds a neutral one.
fn beat_for(lib: &Library, frame: &str, keywords: &[String]) -> OwnedBeat {
    lib.scenes
        .iter()
        .flat_map(|s| s.beats.iter())
        .find(|b| b.frame == frame)
        .cloned()
        .unwrap_or_else(|| OwnedBeat {
            frame: frame.to_string(),
            text: format!("{frame}, covering {}.", keywords.join(", ")),
            kind: Annotate,
            symbols: vec![],
        })
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Deterministic backend for offline runs and tests.
#[derive(Debug, Clone)]
pub struct TemplateBackend {
    model_id: String,
}

impl Default for TemplateBackend {
    fn default() -> Self {
        Self { model_id: "canned-1".into() }
    }
}

impl TemplateBackend {
    pub fn new() -> Self {
        Self::default()
    }

    fn plan(&self, slots: &BTreeMap<String, String>) -> Result<String, BackendError> {
        let lib = library(slot(slots, "topic")?);
        let n: usize = parse_num(slots, "scene_count")?;
        if n == 0 {
            return Err(BackendError::Malformed("scene_count is zero".into()));
        }
        let picked = pick_scenes(&lib, n);
        let scenes = picked
            .iter()
            .map(|s| SceneProposal {
                goal: s.goal.clone(),
                goal_keywords: s.keywords.clone(),
                storyboard: s.beats.iter().map(|b| b.frame.clone()).collect(),
                allowed_primitives: EventKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
                layout_hints: s.layout.clone(),
            })
            .collect();
        let symbols = lib
            .symbols
            .iter()
            .filter_map(|sym| {
                // Re-home the introduction scene onto the picked scenes.
                let first = picked
                    .iter()
                    .position(|s| s.beats.iter().any(|b| b.symbols.contains(&sym.name)))?;
                Some(SymbolProposal { introduced_in_scene: first as u32 + 1, ..sym.clone() })
            })
            .collect();
        let proposal = PlanProposal { scenes, symbols };
        serde_json::to_string_pretty(&proposal).map_err(|e| BackendError::Other(e.to_string()))
    }

    fn narration(&self, slots: &BTreeMap<String, String>, seed: u64) -> Result<String, BackendError> {
        let lib = library(slot(slots, "topic")?);
        let cues = cue_plan(slots)?;
        let frames = storyboard(slots)?;
        let keywords = split_list(slot(slots, "goal_keywords")?, ',');
        let mut out = String::new();
        for (k, (id, mark)) in cues.iter().enumerate() {
            let frame = frames.get(k).map(String::as_str).unwrap_or("Closing frame");
            let b = beat_for(&lib, frame, &keywords);
            out.push_str(&format!("[[cue:{id} @ {}]] {}\n", format_seconds(*mark), with_filler(&b.text, seed, k)));
        }
        Ok(out)
    }

    fn code(&self, slots: &BTreeMap<String, String>) -> Result<String, BackendError> {
        let lib = library(slot(slots, "topic")?);
        let scene: u32 = parse_num(slots, "scene_id")?;
        let duration: f64 = parse_num(slots, "planned_duration_s")?;
        let cues = cue_plan(slots)?;
        let frames = storyboard(slots)?;
        let keywords = split_list(slot(slots, "goal_keywords")?, ',');
        let allowed: Vec<EventKind> =
            split_list(slot(slots, "allowed_primitives")?, ',').iter().filter_map(|p| EventKind::parse(p)).collect();
        let layout = split_list(slot(slots, "layout_hints")?, ';');
        let mut events = Vec::new();
        for (k, (id, mark)) in cues.iter().enumerate() {
            let frame = frames.get(k).map(String::as_str).unwrap_or("Closing frame");
            let b = beat_for(&lib, frame, &keywords);
            let kind = if allowed.contains(&b.kind) {
                b.kind
            } else if allowed.contains(&Annotate) {
                Annotate
            } else {
                *allowed.first().ok_or_else(|| BackendError::Malformed("no allowed primitives".into()))?
            };
            let next = cues.get(k + 1).map(|c| c.1).unwrap_or(duration);
            events.push(ScriptEvent {
                id: format!("{id}.e"),
                kind,
                start_s: round1(mark + 0.2),
                duration_s: round1((next - mark - 0.5).clamp(0.1, 2.5)),
                symbols: b.symbols.clone(),
                bound_cue: Some(id.clone()),
                note: b.frame.clone(),
            });
        }
        let goal = slot(slots, "goal")?;
        let mut script = render_script(scene, goal, &layout, &events, duration);
        let repair = slot(slots, "repair_context")?.trim();
        if !repair.is_empty() {
            // Kept on one comment line and defanged so the run check never reads it as code.
            let one_line = repair.lines().collect::<Vec<_>>().join(" ").replace("Tex(", "Tex (");
            script = script.replacen(
                "from manim import *\n",
                &format!("from manim import *\n# repair context: {one_line}\n"),
                1,
            );
        }
        Ok(script)
    }
}

impl GeneratorBackend for TemplateBackend {
    fn backend_id(&self) -> &str {
        "template"
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn capabilities(&self) -> &[TemplateKind] {
        &[TemplateKind::Plan, TemplateKind::Narration, TemplateKind::Code]
    }

    fn complete(&self, call: &BackendCall<'_>) -> Result<Completion, BackendError> {
        let text = match call.template.kind {
            TemplateKind::Plan => self.plan(call.slot_values)?,
            TemplateKind::Narration => self.narration(call.slot_values, call.seed)?,
            TemplateKind::Code => self.code(call.slot_values)?,
        };
        Ok(Completion { text, model_id: self.model_id.clone() })
    }
}
