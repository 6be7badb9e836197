//! Generic HTTP chat-completion client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendCall, BackendError, Completion, GeneratorBackend, TemplateKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model_id: String,
    /// Name of the environment variable holding a bearer token, if any.
    #[serde(default)]
    pub auth_token_env: Option<String>,
    #[serde(default = "default_tries")]
    pub tries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default = "default_parallelism")]
    pub max_parallelism: usize,
}

fn default_tries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    1000
}
fn default_timeout_s() -> u64 {
    120
}
fn default_parallelism() -> usize {
    4
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            auth_token_env: None,
            tries: default_tries(),
            backoff_base_ms: default_backoff_ms(),
            timeout_s: default_timeout_s(),
            max_parallelism: default_parallelism(),
        }
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let token = match &config.auth_token_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| BackendError::Other(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        Ok(Self { config, client, token })
    }

    fn post_once(&self, body: &Value) -> Result<Completion, BackendError> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        let v: Value = resp.json().map_err(|e| BackendError::Malformed(e.to_string()))?;
        let text = v
            .pointer("/choices/0/message/content")
            .or_else(|| v.pointer("/choices/0/text"))
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::Malformed("no text in first choice".into()))?;
        let model_id = v.get("model").and_then(Value::as_str).unwrap_or(&self.config.model_id);
        Ok(Completion { text: text.to_string(), model_id: model_id.to_string() })
    }
}

impl GeneratorBackend for RemoteBackend {
    fn backend_id(&self) -> &str {
        "remote"
    }

    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn capabilities(&self) -> &[TemplateKind] {
        &[TemplateKind::Plan, TemplateKind::Narration, TemplateKind::Code]
    }

    fn max_parallelism(&self) -> usize {
        self.config.max_parallelism.max(1)
    }

    fn complete(&self, call: &BackendCall<'_>) -> Result<Completion, BackendError> {
        let body = json!({
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": call.prompt}],
            "temperature": call.template.decode_params.temperature,
            "max_tokens": call.template.decode_params.max_output_tokens,
            "seed": call.seed,
        });
        let mut last = BackendError::Other("no attempt made".into());
        for i in 0..self.config.tries.max(1) {
            if i > 0 {
                let wait = self.config.backoff_base_ms.saturating_mul(1 << (i - 1).min(16));
                log::warn!("remote backend retry {i} in {wait} ms: {last}");
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.post_once(&body) {
                Ok(c) => return Ok(c),
                // A well-formed error response will not improve on retry.
                Err(e @ BackendError::Malformed(_)) => return Err(e),
                Err(e) => last = e,
            }
        }
        Err(last)
    }
}
