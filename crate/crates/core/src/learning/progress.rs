use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::rag::PASS_THRESHOLD;
use crate::types::Difficulty;

use super::quiz::QuizMode;

/// Number of most recent static quizzes per topic considered for mastery.
pub const MASTERY_WINDOW: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreStat {
    pub quizzes: u32,
    pub score_sum: f64,
    pub average: f64,
}

impl ScoreStat {
    pub fn record(&mut self, score_fraction: f64) {
        self.quizzes += 1;
        self.score_sum += score_fraction;
        self.average = self.score_sum / f64::from(self.quizzes);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub topic: String,
    pub difficulty: Difficulty,
    pub mode: QuizMode,
    pub correct: usize,
    pub total: usize,
    pub score_fraction: f64,
    pub duration_ms: i64,
    pub completed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProgress {
    pub user_id: String,
    /// topic → difficulty → running average.
    pub averages: BTreeMap<String, BTreeMap<Difficulty, ScoreStat>>,
    pub history: Vec<SessionSummary>,
    pub points: u64,
    pub streak_days: u32,
    pub last_active_date: Option<NaiveDate>,
}

impl UserProgress {
    pub fn new(user_id: impl Into<String>) -> Self {
        UserProgress {
            user_id: user_id.into(),
            averages: BTreeMap::new(),
            history: Vec::new(),
            points: 0,
            streak_days: 0,
            last_active_date: None,
        }
    }

    pub fn average(&self, topic: &str, difficulty: Difficulty) -> Option<f64> {
        self.averages.get(topic)?.get(&difficulty).map(|s| s.average)
    }

    /// Highest difficulty whose average over the learner's trailing
    /// `MASTERY_WINDOW` static quizzes on `topic` meets the pass threshold.
    pub fn mastered_difficulty(&self, topic: &str) -> Option<Difficulty> {
        let recent: Vec<&SessionSummary> = self
            .history
            .iter()
            .rev()
            .filter(|s| s.mode == QuizMode::Static && s.topic == topic)
            .take(MASTERY_WINDOW)
            .collect();
        Difficulty::ALL.iter().rev().copied().find(|&d| {
            let scores: Vec<f64> = recent.iter().filter(|s| s.difficulty == d).map(|s| s.score_fraction).collect();
            !scores.is_empty() && scores.iter().sum::<f64>() / scores.len() as f64 >= PASS_THRESHOLD
        })
    }
}

/// Points for `correct` of `total`: `round(100 * correct / total)`, computed
/// exactly in integers with halves rounded up.
pub fn points_for(correct: usize, total: usize) -> u64 {
    if total == 0 {
        return 0;
    }
    let (c, t) = (correct.min(total) as u64, total as u64);
    (200 * c + t) / (2 * t)
}

/// Streak after activity on `today`: unchanged on the same day, +1 when the
/// last activity was the previous day, otherwise restarted at 1.
pub fn next_streak(streak: u32, last_active: Option<NaiveDate>, today: NaiveDate) -> u32 {
    match last_active {
        Some(last) if last >= today => streak.max(1),
        Some(last) if today.pred_opt() == Some(last) => streak.saturating_add(1),
        _ => 1,
    }
}

/// Applies one completed quiz to the learner's progress.
pub fn award_progress(progress: &mut UserProgress, summary: &SessionSummary) -> u64 {
    let today = summary.completed_at.date_naive();
    let awarded = points_for(summary.correct, summary.total);
    progress.points = progress.points.saturating_add(awarded);
    progress.streak_days = next_streak(progress.streak_days, progress.last_active_date, today);
    progress.last_active_date = Some(progress.last_active_date.map_or(today, |d| d.max(today)));
    progress
        .averages
        .entry(summary.topic.clone())
        .or_default()
        .entry(summary.difficulty)
        .or_default()
        .record(summary.score_fraction);
    progress.history.push(summary.clone());
    awarded
}
