#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use codepace_core::ingest::{ingest_intents, ingest_questions};
use codepace_core::provider::testing::RecordingProvider;
use codepace_core::provider::{MockProvider, TextProvider};
use codepace_core::Corpus;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Corpus holding every fixture question and intent, embedded with the mock.
pub fn fixture_corpus() -> Corpus {
    let provider = MockProvider::default();
    let mut corpus = Corpus::new();
    ingest_questions(fixture("q.jsonl"), &mut corpus, &provider).expect("questions ingest");
    ingest_intents(fixture("intents.json"), &mut corpus, &provider).expect("intents ingest");
    corpus
}

pub fn recording_mock() -> Arc<RecordingProvider<MockProvider>> {
    Arc::new(RecordingProvider::new(MockProvider::default()))
}

pub fn as_dyn<P: TextProvider + 'static>(p: &Arc<P>) -> Arc<dyn TextProvider> {
    p.clone()
}
