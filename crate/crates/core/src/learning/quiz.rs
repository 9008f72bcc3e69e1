use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::rag::{FeedbackQuote, QuestionItem};
use crate::types::Difficulty;

use super::progress::UserProgress;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuizMode {
    Static,
    Dynamic,
}

impl std::str::FromStr for QuizMode {
    type Err = crate::types::UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(QuizMode::Static),
            "dynamic" => Ok(QuizMode::Dynamic),
            _ => Err(crate::types::UnknownVariant {
                what: "quiz mode",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizSession {
    pub session_id: String,
    pub user_id: String,
    pub mode: QuizMode,
    pub topic: String,
    pub difficulty: Difficulty,
    pub question_ids: Vec<String>,
    /// Snapshot of the questions as served, in `question_ids` order.
    pub questions: Vec<QuestionItem>,
    pub answers: BTreeMap<String, usize>,
    pub started_at: DateTime<Utc>,
    pub completed_at: Option<DateTime<Utc>>,
    pub score_fraction: Option<f64>,
    pub duration_ms: Option<i64>,
}

impl QuizSession {
    pub fn is_completed(&self) -> bool {
        self.completed_at.is_some()
    }
}

/// Correct answers and total questions for a set of answers.
pub fn score_answers(questions: &[QuestionItem], answers: &BTreeMap<String, usize>) -> (usize, usize) {
    let correct = questions
        .iter()
        .filter(|q| answers.get(&q.id) == Some(&q.correct_index))
        .count();
    (correct, questions.len())
}

pub fn score_fraction(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub chosen_index: usize,
    pub correct_index: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizOutcome {
    pub session: QuizSession,
    pub correct: usize,
    pub total: usize,
    pub score_fraction: f64,
    pub duration_ms: i64,
    pub quote: FeedbackQuote,
    pub points_awarded: u64,
    pub results: Vec<QuestionOutcome>,
    pub progress: UserProgress,
}
