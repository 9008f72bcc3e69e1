//! Text-generation and embedding backends.

mod http;
mod mock;
pub mod testing;

use std::sync::Arc;
use std::time::Duration;

use crate::vector::Embedding;

pub use http::HttpProvider;
pub use mock::{mock_embedding, tokenize, MockProvider};

pub const DEFAULT_EMBED_DIMENSION: usize = 64;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt: String,
    /// Upper bound on generated tokens (words, for the mock).
    pub max_output_length: usize,
    pub temperature: f64,
    pub stop_markers: Vec<String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            max_output_length: 1024,
            temperature: 0.0,
            stop_markers: Vec::new(),
        }
    }

    pub fn temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature.max(0.0);
        self
    }

    pub fn max_output_length(mut self, n: usize) -> Self {
        self.max_output_length = n.max(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// Generation stopped because it hit `max_output_length`.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("text {index} to embed is empty")]
    EmptyText { index: usize },
    #[error("generation prompt is empty")]
    EmptyPrompt,
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
}

/// A backend able to complete prompts and embed text.
///
/// Implementations are stateless from the caller's point of view and may be
/// shared across threads.
pub trait TextProvider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, ProviderError>;

    /// One unit-norm vector of [`TextProvider::embed_dimension`] per input,
    /// in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError>;

    fn embed_dimension(&self) -> usize;
}

impl<T: TextProvider + ?Sized> TextProvider for Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, ProviderError> {
        (**self).complete(request)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        (**self).embed(texts)
    }

    fn embed_dimension(&self) -> usize {
        (**self).embed_dimension()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: String,
    pub api_key: String,
    pub model_name: String,
    /// Model used for `/embeddings`; defaults to `model_name`.
    pub embed_model: String,
    pub embed_dimension: usize,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            base_url: String::new(),
            api_key: String::new(),
            model_name: String::new(),
            embed_model: String::new(),
            embed_dimension: DEFAULT_EMBED_DIMENSION,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            timeout: Duration::from_secs(60),
        }
    }
}

impl ProviderConfig {
    pub fn mock(embed_dimension: usize) -> Self {
        ProviderConfig {
            embed_dimension,
            ..Self::default()
        }
    }

    /// Reads `LLM_PROVIDER`, `LLM_BASE_URL`, `LLM_API_KEY`, `LLM_MODEL`,
    /// `LLM_EMBED_MODEL`, `LLM_MAX_IN_FLIGHT` and `EMBED_DIM`.
    pub fn from_env() -> Result<Self, ProviderError> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ProviderError> {
        let get = |key: &str| lookup(key).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        let kind = match get("LLM_PROVIDER").as_deref().map(str::to_ascii_lowercase).as_deref() {
            None | Some("mock") => ProviderKind::Mock,
            Some("http") => ProviderKind::Http,
            Some(other) => {
                return Err(ProviderError::InvalidConfig(format!(
                    "LLM_PROVIDER must be 'mock' or 'http', got '{other}'"
                )))
            }
        };
        let parse_usize = |key: &str, default: usize| -> Result<usize, ProviderError> {
            match get(key) {
                None => Ok(default),
                Some(v) => v
                    .parse::<usize>()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| ProviderError::InvalidConfig(format!("{key} must be a positive integer"))),
            }
        };
        let model_name = get("LLM_MODEL").unwrap_or_default();
        let config = ProviderConfig {
            kind,
            base_url: get("LLM_BASE_URL").unwrap_or_default(),
            api_key: get("LLM_API_KEY").unwrap_or_default(),
            embed_model: get("LLM_EMBED_MODEL").unwrap_or_else(|| model_name.clone()),
            model_name,
            embed_dimension: parse_usize("EMBED_DIM", DEFAULT_EMBED_DIMENSION)?,
            max_in_flight: parse_usize("LLM_MAX_IN_FLIGHT", DEFAULT_MAX_IN_FLIGHT)?,
            timeout: Duration::from_secs(60),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.embed_dimension == 0 {
            return Err(ProviderError::InvalidConfig("embed dimension must be positive".into()));
        }
        if self.kind == ProviderKind::Http {
            if self.base_url.trim().is_empty() {
                return Err(ProviderError::InvalidConfig("http provider requires LLM_BASE_URL".into()));
            }
            if self.model_name.trim().is_empty() {
                return Err(ProviderError::InvalidConfig("http provider requires LLM_MODEL".into()));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn TextProvider>, ProviderError> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::Mock => Arc::new(MockProvider::new(self.embed_dimension)),
            ProviderKind::Http => Arc::new(HttpProvider::new(self.clone())?),
        })
    }
}

/// Stable 64-bit FNV-1a hash, the same one the mock embedder uses.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    mock::fnv1a64(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn lookup(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> =
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn defaults_to_mock() {
        let config = ProviderConfig::from_lookup(lookup(&[])).unwrap();
        assert_eq!(config.kind, ProviderKind::Mock);
        assert_eq!(config.embed_dimension, 64);
        assert_eq!(config.max_in_flight, 4);
        assert_eq!(config.build().unwrap().name(), "mock");
    }

    #[test]
    fn http_requires_url_and_model() {
        let err = ProviderConfig::from_lookup(lookup(&[("LLM_PROVIDER", "http")])).unwrap_err();
        assert!(matches!(err, ProviderError::InvalidConfig(_)));
        let config = ProviderConfig::from_lookup(lookup(&[
            ("LLM_PROVIDER", "HTTP"),
            ("LLM_BASE_URL", "http://localhost:9/v1"),
            ("LLM_MODEL", "some-model"),
            ("EMBED_DIM", "128"),
        ]))
        .unwrap();
        assert_eq!(config.kind, ProviderKind::Http);
        assert_eq!(config.embed_model, "some-model");
        assert_eq!(config.embed_dimension, 128);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ProviderConfig::from_lookup(lookup(&[("LLM_PROVIDER", "local")])).is_err());
        assert!(ProviderConfig::from_lookup(lookup(&[("EMBED_DIM", "0")])).is_err());
        assert!(ProviderConfig::from_lookup(lookup(&[("EMBED_DIM", "abc")])).is_err());
    }
}
