//! Provider wrappers for tests: prompt capture, scripted replies and
//! switchable outages.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use super::{Completion, GenerationRequest, ProviderError, TextProvider};
use crate::vector::Embedding;

/// Records every generation request before delegating.
pub struct RecordingProvider<P> {
    inner: P,
    calls: Arc<Mutex<Vec<GenerationRequest>>>,
}

impl<P: TextProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        RecordingProvider {
            inner,
            calls: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn calls(&self) -> Vec<GenerationRequest> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn prompts(&self) -> Vec<String> {
        self.calls().into_iter().map(|r| r.prompt).collect()
    }

    pub fn clear(&self) {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }
}

impl<P: TextProvider> TextProvider for RecordingProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, ProviderError> {
        self.calls
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(request.clone());
        self.inner.complete(request)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        self.inner.embed(texts)
    }

    fn embed_dimension(&self) -> usize {
        self.inner.embed_dimension()
    }
}

/// Returns queued completion texts first, then delegates to `inner`.
pub struct ScriptedProvider<P> {
    inner: P,
    queue: Mutex<VecDeque<Result<String, ProviderError>>>,
}

impl<P: TextProvider> ScriptedProvider<P> {
    pub fn new(inner: P) -> Self {
        ScriptedProvider {
            inner,
            queue: Mutex::new(VecDeque::new()),
        }
    }

    pub fn push_reply(&self, text: impl Into<String>) {
        self.lock().push_back(Ok(text.into()));
    }

    pub fn push_error(&self, error: ProviderError) {
        self.lock().push_back(Err(error));
    }

    pub fn pending(&self) -> usize {
        self.lock().len()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, VecDeque<Result<String, ProviderError>>> {
        self.queue.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl<P: TextProvider> TextProvider for ScriptedProvider<P> {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, ProviderError> {
        let next = self.lock().pop_front();
        match next {
            Some(Ok(text)) => Ok(Completion {
                text,
                truncated: false,
            }),
            Some(Err(e)) => Err(e),
            None => self.inner.complete(request),
        }
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        self.inner.embed(texts)
    }

    fn embed_dimension(&self) -> usize {
        self.inner.embed_dimension()
    }
}

/// Delegates to `inner` until switched off; generation and embedding can be
/// failed independently.
pub struct SwitchableProvider<P> {
    inner: P,
    generation_down: AtomicBool,
    embedding_down: AtomicBool,
}

impl<P: TextProvider> SwitchableProvider<P> {
    pub fn new(inner: P) -> Self {
        SwitchableProvider {
            inner,
            generation_down: AtomicBool::new(false),
            embedding_down: AtomicBool::new(false),
        }
    }

    pub fn set_generation_down(&self, down: bool) {
        self.generation_down.store(down, Ordering::SeqCst);
    }

    pub fn set_embedding_down(&self, down: bool) {
        self.embedding_down.store(down, Ordering::SeqCst);
    }
}

impl<P: TextProvider> TextProvider for SwitchableProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, ProviderError> {
        if self.generation_down.load(Ordering::SeqCst) {
            return Err(ProviderError::Unavailable("generation switched off".into()));
        }
        self.inner.complete(request)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        if self.embedding_down.load(Ordering::SeqCst) {
            return Err(ProviderError::Unavailable("embedding switched off".into()));
        }
        self.inner.embed(texts)
    }

    fn embed_dimension(&self) -> usize {
        self.inner.embed_dimension()
    }
}
