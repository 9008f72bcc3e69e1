use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::types::{normalize_topic, Difficulty};

/// One multiple-choice question from the question corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub topic: String,
    pub difficulty: Difficulty,
    pub stem: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub explanation: String,
}

pub const OPTION_COUNT: usize = 4;
pub const OPTION_LETTERS: [char; OPTION_COUNT] = ['A', 'B', 'C', 'D'];

/// Checks shared by ingested and generated questions.
pub fn validate_question_parts(
    stem: &str,
    options: &[String],
    correct_index: usize,
    explanation: &str,
) -> Result<(), String> {
    if stem.trim().is_empty() {
        return Err("stem must be non-empty".into());
    }
    if options.len() != OPTION_COUNT {
        return Err(format!("expected {OPTION_COUNT} options, found {}", options.len()));
    }
    if options.iter().any(|o| o.trim().is_empty()) {
        return Err("options must be non-empty".into());
    }
    let distinct: HashSet<String> = options.iter().map(|o| o.trim().to_lowercase()).collect();
    if distinct.len() != OPTION_COUNT {
        return Err("options must be distinct".into());
    }
    if correct_index >= OPTION_COUNT {
        return Err(format!("correct_index {correct_index} out of range 0..{}", OPTION_COUNT - 1));
    }
    if explanation.trim().is_empty() {
        return Err("explanation must be non-empty".into());
    }
    Ok(())
}

impl QuestionRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id must be non-empty".into());
        }
        if self.topic.trim().is_empty() {
            return Err("topic must be non-empty".into());
        }
        validate_question_parts(&self.stem, &self.options, self.correct_index, &self.explanation)
    }

    pub(crate) fn normalized(mut self) -> Self {
        self.topic = normalize_topic(&self.topic);
        self
    }

    /// `TOPIC | DIFFICULTY | STEM | OPTIONS | EXPLANATION`, the text that is
    /// embedded and shown to the generator as an exemplar.
    pub fn canonical_text(&self) -> String {
        let options: Vec<String> = OPTION_LETTERS
            .iter()
            .zip(&self.options)
            .map(|(l, o)| format!("{l}) {}", o.trim()))
            .collect();
        format!(
            "{} | {} | {} | {} | {}",
            self.topic,
            self.difficulty,
            self.stem.trim(),
            options.join("; "),
            self.explanation.trim()
        )
    }
}

/// A conversational intent: example utterances and the replies to them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRecord {
    pub tag: String,
    pub patterns: Vec<String>,
    pub responses: Vec<String>,
}

impl IntentRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.tag.trim().is_empty() {
            return Err("tag must be non-empty".into());
        }
        if self.patterns.is_empty() {
            return Err("patterns must be non-empty".into());
        }
        if self.patterns.iter().any(|p| p.trim().is_empty()) {
            return Err("patterns must not contain blank entries".into());
        }
        if self.responses.is_empty() || self.responses.iter().all(|r| r.trim().is_empty()) {
            return Err("responses must be non-empty".into());
        }
        Ok(())
    }
}

/// Free-form lesson text, split with the chunker before embedding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LessonRecord {
    pub id: String,
    pub topic: String,
    pub difficulty: Difficulty,
    pub text: String,
}
