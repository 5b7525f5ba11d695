//! Generator backends: live HTTP model calls or content-addressed replay.

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::fixtures::FixtureStore;
use super::InferenceError;

/// Live-mode temperature when none is configured.
pub const DEFAULT_TEMPERATURE: f64 = 0.8;

const DEFAULT_API_URL: &str = "https://api.anthropic.com/v1/messages";
const API_VERSION: &str = "2023-06-01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Live,
    Replay,
}

/// Sends one prompt to a model and returns its raw text.
pub trait Transport: Send + Sync {
    fn send(&self, prompt: &str, temperature: f64) -> Result<String, InferenceError>;
}

/// Messages-API transport configured from the environment:
/// `CBFL_API_KEY` (or `ANTHROPIC_API_KEY`), `CBFL_MODEL`, and optionally
/// `CBFL_API_URL`.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    key: String,
    model: String,
}

impl HttpTransport {
    pub fn from_env() -> Result<Self, InferenceError> {
        let key = std::env::var("CBFL_API_KEY")
            .or_else(|_| std::env::var("ANTHROPIC_API_KEY"))
            .map_err(|_| InferenceError::BackendUnavailable("set CBFL_API_KEY for live inference".into()))?;
        let model = std::env::var("CBFL_MODEL")
            .map_err(|_| InferenceError::BackendUnavailable("set CBFL_MODEL for live inference".into()))?;
        let url = std::env::var("CBFL_API_URL").unwrap_or_else(|_| DEFAULT_API_URL.to_string());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Ok(Self { agent, url, key, model })
    }

    pub fn model(&self) -> &str {
        &self.model
    }
}

impl Transport for HttpTransport {
    fn send(&self, prompt: &str, temperature: f64) -> Result<String, InferenceError> {
        let body = json!({
            "model": self.model,
            "max_tokens": 4096,
            "temperature": temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let unavailable = |e: ureq::Error| InferenceError::BackendUnavailable(e.to_string());
        let reply: Value = self
            .agent
            .post(&self.url)
            .header("x-api-key", &self.key)
            .header("anthropic-version", API_VERSION)
            .send_json(&body)
            .map_err(unavailable)?
            .body_mut()
            .read_json()
            .map_err(unavailable)?;
        let text: String = reply["content"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|block| block["text"].as_str())
            .collect();
        if text.is_empty() {
            return Err(InferenceError::BackendUnavailable(format!("reply has no text: {reply}")));
        }
        Ok(text)
    }
}

/// A configured generator. Replay serves stored responses by key; Live
/// calls the transport and, when a store is attached, records what it got.
#[derive(Clone)]
pub struct Backend {
    kind: BackendKind,
    temperature: f64,
    store: Option<Arc<FixtureStore>>,
    transport: Option<Arc<dyn Transport>>,
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backend")
            .field("kind", &self.kind)
            .field("temperature", &self.temperature)
            .field("store", &self.store.as_ref().map(|s| s.path().to_path_buf()))
            .finish()
    }
}

impl Backend {
    /// Replay from an existing fixture file.
    pub fn replay(path: impl Into<std::path::PathBuf>) -> Result<Self, InferenceError> {
        let store = FixtureStore::open_existing(path)?;
        Ok(Self {
            kind: BackendKind::Replay,
            temperature: 0.0,
            store: Some(Arc::new(store)),
            transport: None,
        })
    }

    /// Live backend over `transport`, recording into `record_to` if given.
    pub fn live(
        transport: Arc<dyn Transport>,
        temperature: f64,
        record_to: Option<std::path::PathBuf>,
    ) -> Result<Self, InferenceError> {
        let store = record_to.map(FixtureStore::open).transpose()?.map(Arc::new);
        Ok(Self { kind: BackendKind::Live, temperature, store, transport: Some(transport) })
    }

    /// Live backend over the environment-configured HTTP transport.
    pub fn live_from_env(temperature: f64, record_to: Option<std::path::PathBuf>) -> Result<Self, InferenceError> {
        Self::live(Arc::new(HttpTransport::from_env()?), temperature, record_to)
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// The same backend at another temperature.
    pub fn at_temperature(&self, temperature: f64) -> Self {
        Self { temperature, ..self.clone() }
    }

    pub(crate) fn lookup(&self, key: &str) -> Result<String, InferenceError> {
        self.store
            .as_ref()
            .and_then(|s| s.get(key))
            .ok_or_else(|| InferenceError::FixtureMiss(key.to_string()))
    }

    pub(crate) fn send(&self, prompt: &str) -> Result<String, InferenceError> {
        let t = self
            .transport
            .as_ref()
            .ok_or_else(|| InferenceError::BackendUnavailable("replay backend cannot generate".into()))?;
        t.send(prompt, self.temperature)
    }

    pub(crate) fn remember(&self, key: &str, response: &str) -> Result<(), InferenceError> {
        if let Some(store) = &self.store {
            store.insert(key, response)?;
        }
        Ok(())
    }

    /// Raw completion by key: replayed in Replay mode, generated and
    /// recorded in Live mode.
    pub(crate) fn complete(&self, key: &str, prompt: &str) -> Result<String, InferenceError> {
        match self.kind {
            BackendKind::Replay => self.lookup(key),
            BackendKind::Live => {
                let text = self.send(prompt)?;
                self.remember(key, &text)?;
                Ok(text)
            }
        }
    }
}

/// Remove one surrounding Markdown code fence, if present.
pub fn strip_fences(text: &str) -> String {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t.to_string();
    };
    let body = match rest.find('\n') {
        Some(i) => &rest[i + 1..],
        None => rest,
    };
    body.trim_end().strip_suffix("```").unwrap_or(body).trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fences() {
        let inner = r#"{"version": "cbfl-ir", "constraints": []}"#;
        assert_eq!(strip_fences(inner), inner);
        assert_eq!(strip_fences(&format!("```json\n{inner}\n```")), inner);
        assert_eq!(strip_fences(&format!("  ```\n{inner}\n```\n")), inner);
    }
}
