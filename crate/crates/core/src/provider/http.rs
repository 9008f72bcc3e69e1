//! Remote provider speaking the common chat-completions wire format.
//!
//! Generation: `POST {base_url}/chat/completions`
//!
//! ```json
//! {"model": "...", "messages": [{"role": "user", "content": "<prompt>"}],
//!  "temperature": 0.0, "max_tokens": 1024, "stop": ["..."]}
//! ```
//!
//! The reply text is `choices[0].message.content`; `finish_reason == "length"`
//! marks the completion as truncated.
//!
//! Embedding: `POST {base_url}/embeddings` with `{"model": "...", "input": [..]}`,
//! reading `data[i].embedding` ordered by `data[i].index`. Vectors are
//! L2-normalized on receipt.
//!
//! `Authorization: Bearer <api_key>` is sent when a key is configured.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Completion, GenerationRequest, ProviderConfig, ProviderError, TextProvider};
use crate::vector::Embedding;

const RETRY_BACKOFF: Duration = Duration::from_millis(250);
const ATTEMPTS: u32 = 2;

pub struct HttpProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
    gate: InFlightGate,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model_name)
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = InFlightGate::new(config.max_in_flight.max(1));
        Ok(HttpProvider {
            config,
            agent,
            gate,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    /// POST with one retry on transient failure.
    fn post(&self, path: &str, body: &serde_json::Value) -> Result<serde_json::Value, ProviderError> {
        let _permit = self.gate.acquire();
        let url = self.url(path);
        let mut last_error = String::new();
        for attempt in 0..ATTEMPTS {
            if attempt > 0 {
                thread::sleep(RETRY_BACKOFF * 2u32.pow(attempt - 1));
            }
            let mut request = self.agent.post(&url).header("Content-Type", "application/json");
            if !self.config.api_key.is_empty() {
                request = request.header("Authorization", format!("Bearer {}", self.config.api_key));
            }
            match request.send_json(body) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    if (200..300).contains(&status) {
                        return response
                            .body_mut()
                            .read_json::<serde_json::Value>()
                            .map_err(|e| ProviderError::Unavailable(format!("unreadable response: {e}")));
                    }
                    last_error = format!("{url} returned HTTP {status}");
                    let transient = status == 429 || status >= 500;
                    if !transient {
                        break;
                    }
                }
                Err(e) => last_error = format!("{url}: {e}"),
            }
            log::warn!("provider call failed (attempt {}): {last_error}", attempt + 1);
        }
        Err(ProviderError::Unavailable(last_error))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

fn bad_response(e: impl std::fmt::Display) -> ProviderError {
    ProviderError::Unavailable(format!("malformed provider response: {e}"))
}

impl TextProvider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, ProviderError> {
        if request.prompt.trim().is_empty() {
            return Err(ProviderError::EmptyPrompt);
        }
        let mut body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_length,
        });
        if !request.stop_markers.is_empty() {
            body["stop"] = json!(request.stop_markers);
        }
        let value = self.post("chat/completions", &body)?;
        let parsed: ChatResponse = serde_json::from_value(value).map_err(bad_response)?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| bad_response("no choices"))?;
        let text = choice.message.content.unwrap_or_default();
        if text.trim().is_empty() {
            return Err(bad_response("empty completion"));
        }
        Ok(Completion {
            text,
            truncated: choice.finish_reason.as_deref() == Some("length"),
        })
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        if let Some(index) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(ProviderError::EmptyText { index });
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({"model": self.config.embed_model, "input": texts});
        let value = self.post("embeddings", &body)?;
        let mut parsed: EmbeddingResponse = serde_json::from_value(value).map_err(bad_response)?;
        if parsed.data.len() != texts.len() {
            return Err(bad_response(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        parsed
            .data
            .sort_by_key(|d| d.index.unwrap_or(usize::MAX));
        parsed
            .data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.config.embed_dimension {
                    return Err(bad_response(format!(
                        "embedding dimension {} does not match configured {}",
                        d.embedding.len(),
                        self.config.embed_dimension
                    )));
                }
                Embedding::new(d.embedding)
                    .map_err(bad_response)?
                    .normalized()
                    .ok_or_else(|| bad_response("zero embedding"))
            })
            .collect()
    }

    fn embed_dimension(&self) -> usize {
        self.config.embed_dimension
    }
}

/// Counting semaphore bounding concurrent remote calls.
struct InFlightGate {
    limit: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlightGate);

impl InFlightGate {
    fn new(limit: usize) -> Self {
        InFlightGate {
            limit,
            busy: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut busy = self.busy.lock().unwrap_or_else(|e| e.into_inner());
        while *busy >= self.limit {
            busy = self.freed.wait(busy).unwrap_or_else(|e| e.into_inner());
        }
        *busy += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut busy = self.0.busy.lock().unwrap_or_else(|e| e.into_inner());
        *busy -= 1;
        self.0.freed.notify_one();
    }
}
