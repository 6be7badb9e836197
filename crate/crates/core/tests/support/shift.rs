//! A backend that delays the first event of one scene, for exercising the
//! regression check against a real timing change.

use scenesmith_core::generation::{BackendCall, BackendError, Completion, GeneratorBackend, TemplateBackend, TemplateKind};

pub struct ShiftedBackend {
    pub inner: TemplateBackend,
    pub scene: u32,
    pub delta_s: f64,
}

/// Moves the first `# @event` and its `_wait_until` call by `delta_s`.
pub fn shift_first_event(code: &str, delta_s: f64) -> String {
    let mut old = None;
    let mut out = Vec::new();
    for line in code.lines() {
        let t = line.trim_start();
        let indent = &line[..line.len() - t.len()];
        if old.is_none() {
            if let Some(rest) = t.strip_prefix("# @event ") {
                let mut f: Vec<String> = rest.split_whitespace().map(String::from).collect();
                let start: f64 = f[2].parse().unwrap();
                old = Some((f[2].clone(), start + delta_s));
                f[2] = format!("{:.1}", start + delta_s);
                out.push(format!("{indent}# @event {}", f.join(" ")));
                continue;
            }
        }
        if let Some((text, new)) = &old {
            if t == format!("_wait_until(self, {text})") {
                out.push(format!("{indent}_wait_until(self, {new:.1})"));
                continue;
            }
        }
        out.push(line.to_string());
    }
    let mut s = out.join("\n");
    s.push('\n');
    s
}

impl GeneratorBackend for ShiftedBackend {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }
    fn capabilities(&self) -> &[TemplateKind] {
        self.inner.capabilities()
    }
    fn complete(&self, call: &BackendCall<'_>) -> Result<Completion, BackendError> {
        let mut c = self.inner.complete(call)?;
        let scene = call.slot_values.get("scene_id").and_then(|s| s.parse::<u32>().ok());
        if call.template.kind == TemplateKind::Code && scene == Some(self.scene) {
            c.text = shift_first_event(&c.text, self.delta_s);
        }
        Ok(c)
    }
}
