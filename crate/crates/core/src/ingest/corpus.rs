use std::collections::BTreeMap;

use super::records::{IntentRecord, LessonRecord, QuestionRecord};
use super::IngestError;
use crate::storage::{Storage, StorageError};
use crate::vector::{VectorError, VectorIndex};

pub const NS_QUESTIONS: &str = "kb_questions";
pub const NS_INTENTS: &str = "kb_intents";
pub const NS_LESSONS: &str = "kb_lessons";
pub const NS_INDEX: &str = "index";
pub const INDEX_KEY: &str = "vectors";

/// Source records behind the index: the question bank, intent replies keyed
/// by tag, and lesson texts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    pub(crate) questions: BTreeMap<String, QuestionRecord>,
    pub(crate) intents: BTreeMap<String, IntentRecord>,
    pub(crate) lessons: BTreeMap<String, LessonRecord>,
}

impl KnowledgeBase {
    pub fn question(&self, id: &str) -> Option<&QuestionRecord> {
        self.questions.get(id)
    }

    pub fn questions(&self) -> impl Iterator<Item = &QuestionRecord> {
        self.questions.values()
    }

    pub fn intent(&self, tag: &str) -> Option<&IntentRecord> {
        self.intents.get(tag)
    }

    pub fn intents(&self) -> impl Iterator<Item = &IntentRecord> {
        self.intents.values()
    }

    pub fn lessons(&self) -> impl Iterator<Item = &LessonRecord> {
        self.lessons.values()
    }

    pub fn question_count(&self) -> usize {
        self.questions.len()
    }

    pub fn intent_count(&self) -> usize {
        self.intents.len()
    }

    fn save(&self, storage: &dyn Storage) -> Result<(), StorageError> {
        for q in self.questions.values() {
            storage.put_json(NS_QUESTIONS, &q.id, q)?;
        }
        for i in self.intents.values() {
            storage.put_json(NS_INTENTS, &i.tag, i)?;
        }
        for l in self.lessons.values() {
            storage.put_json(NS_LESSONS, &l.id, l)?;
        }
        Ok(())
    }

    fn load(storage: &dyn Storage) -> Result<Self, StorageError> {
        let mut kb = KnowledgeBase::default();
        for key in storage.keys(NS_QUESTIONS)? {
            if let Some(q) = storage.get_json::<QuestionRecord>(NS_QUESTIONS, &key)? {
                kb.questions.insert(q.id.clone(), q);
            }
        }
        for key in storage.keys(NS_INTENTS)? {
            if let Some(i) = storage.get_json::<IntentRecord>(NS_INTENTS, &key)? {
                kb.intents.insert(i.tag.clone(), i);
            }
        }
        for key in storage.keys(NS_LESSONS)? {
            if let Some(l) = storage.get_json::<LessonRecord>(NS_LESSONS, &key)? {
                kb.lessons.insert(l.id.clone(), l);
            }
        }
        Ok(kb)
    }
}

/// The vector index together with the records it was built from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub index: VectorIndex,
    pub knowledge: KnowledgeBase,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads the persisted corpus, or an empty one if nothing was saved yet.
    pub fn load(storage: &dyn Storage) -> Result<Self, IngestError> {
        let knowledge = KnowledgeBase::load(storage)?;
        let index = match storage.get(NS_INDEX, INDEX_KEY)? {
            Some(bytes) => VectorIndex::from_bytes(&bytes)?,
            None => VectorIndex::new(),
        };
        Ok(Corpus { index, knowledge })
    }

    pub fn save(&self, storage: &dyn Storage) -> Result<(), IngestError> {
        self.knowledge.save(storage)?;
        storage.put(NS_INDEX, INDEX_KEY, &self.index.to_bytes())?;
        Ok(())
    }
}

impl From<StorageError> for IngestError {
    fn from(e: StorageError) -> Self {
        IngestError::Storage(e.to_string())
    }
}

impl From<VectorError> for IngestError {
    fn from(e: VectorError) -> Self {
        IngestError::Index(e)
    }
}
