//! Corpus parsing, chunking and embedding into the vector index.
//!
//! Question corpus: UTF-8, one JSON object per line with the fields of
//! [`QuestionRecord`]. Blank lines are skipped.
//!
//! Intents corpus: one UTF-8 JSON document, either a list of
//! `{tag, patterns, responses}` objects or an object whose `intents` field
//! holds that list.
//!
//! Each file is ingested all-or-nothing: any error leaves the corpus as it
//! was.

mod chunking;
mod corpus;
mod records;

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

pub use chunking::{chunk_spans, chunk_text, ChunkingConfig, InvalidChunking, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
pub use corpus::{Corpus, KnowledgeBase};
pub use records::{
    validate_question_parts, IntentRecord, LessonRecord, QuestionRecord, OPTION_COUNT, OPTION_LETTERS,
};

use crate::provider::{ProviderError, TextProvider};
use crate::types::{normalize_topic, ChunkKind, Difficulty};
use crate::vector::{ChunkMetadata, Embedding, NewChunk, VectorError};

/// Texts sent to the embedder per call.
pub const EMBED_BATCH: usize = 64;

pub const ATTR_QUESTION_ID: &str = "question_id";
pub const ATTR_TAG: &str = "tag";
pub const ATTR_LESSON_ID: &str = "lesson_id";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error{}: {message}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("duplicate intent tag '{0}'")]
    DuplicateTag(String),
    #[error("duplicate question id '{id}' on line {line}")]
    DuplicateQuestionId { id: String, line: usize },
    #[error("embedding failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("index rejected chunks: {0}")]
    Index(VectorError),
    #[error("storage failed: {0}")]
    Storage(String),
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Embed `texts` in order, [`EMBED_BATCH`] at a time.
pub fn embed_all(provider: &dyn TextProvider, texts: &[String]) -> Result<Vec<Embedding>, IngestError> {
    let mut out = Vec::with_capacity(texts.len());
    for batch in texts.chunks(EMBED_BATCH) {
        let vectors = provider.embed(batch)?;
        if vectors.len() != batch.len() {
            return Err(ProviderError::Unavailable(format!(
                "embedder returned {} vectors for {} texts",
                vectors.len(),
                batch.len()
            ))
            .into());
        }
        out.extend(vectors);
    }
    Ok(out)
}

/// Parses a line-delimited question file without touching any corpus.
pub fn parse_questions(content: &str) -> Result<Vec<QuestionRecord>, IngestError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: QuestionRecord = serde_json::from_str(line).map_err(|e| IngestError::Parse {
            line: Some(line_no),
            message: e.to_string(),
        })?;
        record.validate().map_err(|message| IngestError::Parse {
            line: Some(line_no),
            message,
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(IngestError::DuplicateQuestionId {
                id: record.id,
                line: line_no,
            });
        }
        records.push(record.normalized());
    }
    Ok(records)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntentsDocument {
    List(Vec<IntentRecord>),
    Wrapped { intents: Vec<IntentRecord> },
}

pub fn parse_intents(content: &str) -> Result<Vec<IntentRecord>, IngestError> {
    if content.trim().is_empty() {
        return Ok(Vec::new());
    }
    // Parse loosely first so that shape errors carry serde's line number.
    let value: serde_json::Value = serde_json::from_str(content).map_err(|e| IngestError::Parse {
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let doc: IntentsDocument = serde_json::from_value(value).map_err(|_| IngestError::Parse {
        line: None,
        message: "expected a list of {tag, patterns, responses} objects or {\"intents\": [...]}".into(),
    })?;
    let intents = match doc {
        IntentsDocument::List(list) | IntentsDocument::Wrapped { intents: list } => list,
    };
    let mut tags = HashSet::new();
    for (i, intent) in intents.iter().enumerate() {
        intent.validate().map_err(|message| IngestError::Parse {
            line: None,
            message: format!("intent #{} ('{}'): {message}", i + 1, intent.tag),
        })?;
        if !tags.insert(intent.tag.clone()) {
            return Err(IngestError::DuplicateTag(intent.tag.clone()));
        }
    }
    Ok(intents)
}

/// One chunk per question, kind `question`. Returns the number ingested.
pub fn ingest_question_records(
    records: Vec<QuestionRecord>,
    corpus: &mut Corpus,
    provider: &dyn TextProvider,
) -> Result<usize, IngestError> {
    for (i, r) in records.iter().enumerate() {
        if corpus.knowledge.questions.contains_key(&r.id) {
            return Err(IngestError::DuplicateQuestionId {
                id: r.id.clone(),
                line: i + 1,
            });
        }
    }
    let texts: Vec<String> = records.iter().map(QuestionRecord::canonical_text).collect();
    let embeddings = embed_all(provider, &texts)?;
    let chunks = records
        .iter()
        .zip(texts)
        .zip(embeddings)
        .map(|((r, text), embedding)| {
            let metadata = ChunkMetadata::new(&r.topic, r.difficulty, ChunkKind::Question)
                .with_attribute(ATTR_QUESTION_ID, &r.id);
            NewChunk::new(&r.id, text, metadata, embedding)
        })
        .collect();
    corpus.index.insert_batch(chunks)?;
    let count = records.len();
    for r in records {
        corpus.knowledge.questions.insert(r.id.clone(), r);
    }
    Ok(count)
}

/// One chunk per `(tag, pattern)`, kind `conversation`; replies are kept in
/// the knowledge base under the tag. Returns the number of patterns.
pub fn ingest_intent_records(
    intents: Vec<IntentRecord>,
    corpus: &mut Corpus,
    provider: &dyn TextProvider,
) -> Result<usize, IngestError> {
    if let Some(dup) = intents.iter().find(|i| corpus.knowledge.intents.contains_key(&i.tag)) {
        return Err(IngestError::DuplicateTag(dup.tag.clone()));
    }
    let pairs: Vec<(&IntentRecord, &String)> = intents
        .iter()
        .flat_map(|i| i.patterns.iter().map(move |p| (i, p)))
        .collect();
    let texts: Vec<String> = pairs.iter().map(|(_, p)| p.trim().to_string()).collect();
    let embeddings = embed_all(provider, &texts)?;
    let chunks = pairs
        .iter()
        .zip(texts)
        .zip(embeddings)
        .map(|(((intent, _), text), embedding)| {
            let metadata = ChunkMetadata::new(&intent.tag, Difficulty::Beginner, ChunkKind::Conversation)
                .with_attribute(ATTR_TAG, &intent.tag);
            NewChunk::new(&intent.tag, text, metadata, embedding)
        })
        .collect();
    corpus.index.insert_batch(chunks)?;
    let count = pairs.len();
    for intent in intents {
        corpus.knowledge.intents.insert(intent.tag.clone(), intent);
    }
    Ok(count)
}

/// Chunks a lesson with `cfg` and indexes every segment, kind `lesson`.
/// Returns the number of segments.
pub fn ingest_lesson(
    lesson: LessonRecord,
    cfg: &ChunkingConfig,
    corpus: &mut Corpus,
    provider: &dyn TextProvider,
) -> Result<usize, IngestError> {
    if corpus.knowledge.lessons.contains_key(&lesson.id) {
        return Err(IngestError::Parse {
            line: None,
            message: format!("lesson '{}' already ingested", lesson.id),
        });
    }
    let lesson = LessonRecord {
        topic: normalize_topic(&lesson.topic),
        ..lesson
    };
    let segments: Vec<String> = chunk_text(&lesson.text, cfg)
        .into_iter()
        .filter(|s| !s.trim().is_empty())
        .collect();
    let embeddings = embed_all(provider, &segments)?;
    let chunks = segments
        .into_iter()
        .zip(embeddings)
        .map(|(text, embedding)| {
            let metadata = ChunkMetadata::new(&lesson.topic, lesson.difficulty, ChunkKind::Lesson)
                .with_attribute(ATTR_LESSON_ID, &lesson.id);
            NewChunk::new(&lesson.id, text, metadata, embedding)
        })
        .collect::<Vec<_>>();
    let count = chunks.len();
    corpus.index.insert_batch(chunks)?;
    corpus.knowledge.lessons.insert(lesson.id.clone(), lesson);
    Ok(count)
}

pub fn ingest_questions(
    path: impl AsRef<Path>,
    corpus: &mut Corpus,
    provider: &dyn TextProvider,
) -> Result<usize, IngestError> {
    let records = parse_questions(&read(path.as_ref())?)?;
    ingest_question_records(records, corpus, provider)
}

pub fn ingest_intents(
    path: impl AsRef<Path>,
    corpus: &mut Corpus,
    provider: &dyn TextProvider,
) -> Result<usize, IngestError> {
    let intents = parse_intents(&read(path.as_ref())?)?;
    ingest_intent_records(intents, corpus, provider)
}

/// Re-embeds every source record into a fresh index: questions by id, then
/// intents by tag, then lessons by id.
pub fn rebuild(
    knowledge: &KnowledgeBase,
    cfg: &ChunkingConfig,
    provider: &dyn TextProvider,
) -> Result<Corpus, IngestError> {
    let mut corpus = Corpus::new();
    ingest_question_records(knowledge.questions().cloned().collect(), &mut corpus, provider)?;
    ingest_intent_records(knowledge.intents().cloned().collect(), &mut corpus, provider)?;
    for lesson in knowledge.lessons() {
        ingest_lesson(lesson.clone(), cfg, &mut corpus, provider)?;
    }
    Ok(corpus)
}
