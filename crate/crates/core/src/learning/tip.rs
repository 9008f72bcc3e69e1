//! Progress snapshots and the tip-of-the-day conditions.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::progress::UserProgress;

/// Quizzes considered when classifying recent performance.
pub const RECENT_WINDOW: usize = 3;
pub const STRUGGLING_BELOW: f64 = 0.5;
pub const THRIVING_FROM: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TipCondition {
    Starter,
    Struggling,
    Steady,
    Thriving,
}

impl TipCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            TipCondition::Starter => "starter",
            TipCondition::Struggling => "struggling",
            TipCondition::Steady => "steady",
            TipCondition::Thriving => "thriving",
        }
    }

    pub fn fallback_tips(self) -> &'static [&'static str] {
        match self {
            TipCondition::Starter => &[
                "Pick one tiny topic today and spend ten focused minutes on it.",
                "Type out a short example by hand instead of copying it; your fingers learn too.",
            ],
            TipCondition::Struggling => &[
                "Hard days are part of learning. Revisit one missed question and read its explanation slowly.",
                "Step away from the screen for a few minutes, then try a single easier question to rebuild confidence.",
            ],
            TipCondition::Steady => &[
                "Consistency wins. Try one quiz a level above your comfort zone today.",
                "Summarize what you learned yesterday in three sentences before starting something new.",
            ],
            TipCondition::Thriving => &[
                "Great momentum! Teach a concept you know well to a friend to lock it in.",
                "Challenge yourself with a small project that mixes two topics you have mastered.",
            ],
        }
    }
}

/// The facts a tip is conditioned on; its hash is recorded with the tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressSnapshot {
    pub condition: TipCondition,
    pub quizzes_taken: usize,
    pub recent_scores: Vec<f64>,
    pub recent_average: Option<f64>,
    pub average_duration_ms: Option<i64>,
    pub points: u64,
    pub streak_days: u32,
}

impl ProgressSnapshot {
    pub fn of(progress: &UserProgress) -> Self {
        let recent: Vec<f64> = progress
            .history
            .iter()
            .rev()
            .take(RECENT_WINDOW)
            .map(|s| s.score_fraction)
            .collect();
        let recent_average = (!recent.is_empty()).then(|| recent.iter().sum::<f64>() / recent.len() as f64);
        let condition = match recent_average {
            None => TipCondition::Starter,
            Some(a) if a < STRUGGLING_BELOW => TipCondition::Struggling,
            Some(a) if a >= THRIVING_FROM => TipCondition::Thriving,
            Some(_) => TipCondition::Steady,
        };
        let average_duration_ms = (!progress.history.is_empty()).then(|| {
            progress.history.iter().map(|s| s.duration_ms).sum::<i64>() / progress.history.len() as i64
        });
        ProgressSnapshot {
            condition,
            quizzes_taken: progress.history.len(),
            recent_scores: recent,
            recent_average,
            average_duration_ms,
            points: progress.points,
            streak_days: progress.streak_days,
        }
    }

    /// Hex SHA-256 of the snapshot's canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("snapshot serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyTip {
    pub user_id: String,
    pub date: NaiveDate,
    pub text: String,
    pub condition: TipCondition,
    pub derived_from: String,
    /// True when the provider failed and a built-in tip was stored instead.
    pub fallback: bool,
}
