//! Quiz lifecycle, progress and gamification, roadmaps and daily tips.

mod clock;
mod progress;
mod quiz;
mod roadmap;
mod tip;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use clock::{Clock, FixedClock, SystemClock};
pub use progress::{award_progress, next_streak, points_for, ScoreStat, SessionSummary, UserProgress, MASTERY_WINDOW};
pub use quiz::{score_answers, score_fraction, QuestionOutcome, QuizMode, QuizOutcome, QuizSession};
pub use roadmap::{
    fallback_milestones, normalize_topics, parse_roadmap, validate_milestones, Milestone, Roadmap, RoadmapSource,
    EXAMPLE_ROADMAP, MAX_TIMELINE_WEEKS,
};
pub use tip::{DailyTip, ProgressSnapshot, TipCondition, RECENT_WINDOW, STRUGGLING_BELOW, THRIVING_FROM};

use crate::ingest::{Corpus, OPTION_COUNT};
use crate::protocol;
use crate::provider::stable_hash;
use crate::rag::{
    assemble_prompt, escalate, ChatReply, ChatTurn, DynamicQuestionRequest, PromptKind, PromptParams, QuestionItem,
    RagError, RagPipeline, CREATIVE_TEMPERATURE, STRUCTURED_TEMPERATURE,
};
use crate::storage::{Storage, StorageError};
use crate::types::{normalize_topic, Difficulty};

pub const NS_SESSIONS: &str = "sessions";
pub const NS_PROGRESS: &str = "progress";
pub const NS_TIPS: &str = "tips";
pub const NS_ROADMAPS: &str = "roadmaps";
pub const NS_DYNAMIC_QUESTIONS: &str = "dynamic_questions";
pub const LOG_QUIZ_RESULTS: &str = "quiz_results";

/// Upper bound on questions per quiz.
pub const MAX_QUIZ_QUESTIONS: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum LearningError {
    #[error("question count must be between 1 and {MAX_QUIZ_QUESTIONS}, got {0}")]
    InvalidCount(usize),
    #[error("only {available} questions match, {requested} requested")]
    InsufficientQuestions { requested: usize, available: usize },
    #[error("quiz session '{0}' not found")]
    SessionNotFound(String),
    #[error("question '{0}' not found")]
    QuestionNotFound(String),
    #[error("quiz session '{0}' is already completed")]
    SessionAlreadyCompleted(String),
    #[error("answers missing for questions: {}", missing.join(", "))]
    IncompleteAnswers { missing: Vec<String> },
    #[error("invalid answer: {0}")]
    InvalidAnswer(String),
    #[error("at least one topic is required")]
    EmptyTopics,
    #[error("timeline must be between 1 and {MAX_TIMELINE_WEEKS} weeks, got {0}")]
    InvalidTimeline(u32),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error("storage failure: {0}")]
    Storage(#[from] StorageError),
}

/// Domain façade used by the HTTP layer. Per-user mutations are serialized
/// with a lock per user id; the corpus sits behind a reader–writer lock.
pub struct LearningService {
    corpus: Arc<RwLock<Corpus>>,
    pipeline: RagPipeline,
    storage: Arc<dyn Storage>,
    clock: Arc<dyn Clock>,
    rng: Mutex<ChaCha8Rng>,
    user_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl LearningService {
    /// `seed` fixes the static-quiz sampler; `None` seeds from entropy.
    pub fn new(
        corpus: Arc<RwLock<Corpus>>,
        pipeline: RagPipeline,
        storage: Arc<dyn Storage>,
        clock: Arc<dyn Clock>,
        seed: Option<u64>,
    ) -> Self {
        let seed = seed.unwrap_or_else(|| rand::rng().random());
        LearningService {
            corpus,
            pipeline,
            storage,
            clock,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            user_locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn corpus(&self) -> &Arc<RwLock<Corpus>> {
        &self.corpus
    }

    pub fn pipeline(&self) -> &RagPipeline {
        &self.pipeline
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    fn read_corpus(&self) -> RwLockReadGuard<'_, Corpus> {
        self.corpus.read().unwrap_or_else(|e| e.into_inner())
    }

    fn user_lock(&self, user_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.user_locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(user_id.to_string()).or_default().clone()
    }

    pub fn progress(&self, user_id: &str) -> Result<UserProgress, LearningError> {
        Ok(self
            .storage
            .as_ref()
            .get_json::<UserProgress>(NS_PROGRESS, user_id)?
            .unwrap_or_else(|| UserProgress::new(user_id)))
    }

    pub fn session(&self, user_id: &str, session_id: &str) -> Result<QuizSession, LearningError> {
        match self.storage.as_ref().get_json::<QuizSession>(NS_SESSIONS, session_id)? {
            Some(s) if s.user_id == user_id => Ok(s),
            _ => Err(LearningError::SessionNotFound(session_id.to_string())),
        }
    }

    pub fn start_quiz(
        &self,
        user_id: &str,
        topic: &str,
        difficulty: Difficulty,
        mode: QuizMode,
        count: usize,
    ) -> Result<QuizSession, LearningError> {
        if count == 0 || count > MAX_QUIZ_QUESTIONS {
            return Err(LearningError::InvalidCount(count));
        }
        let topic = normalize_topic(topic);
        let (questions, session_difficulty) = match mode {
            QuizMode::Static => (self.sample_static(&topic, difficulty, count)?, difficulty),
            QuizMode::Dynamic => {
                let mastered = self.progress(user_id)?.mastered_difficulty(&topic);
                let request = DynamicQuestionRequest {
                    topic: topic.clone(),
                    difficulty,
                    count,
                    mastered,
                };
                let items = {
                    let corpus = self.read_corpus();
                    self.pipeline.generate_dynamic_questions(&corpus, &request)?
                };
                for item in &items {
                    self.storage.as_ref().put_json(NS_DYNAMIC_QUESTIONS, &item.id, item)?;
                }
                (items, escalate(difficulty, mastered))
            }
        };
        let session = QuizSession {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            user_id: user_id.to_string(),
            mode,
            topic,
            difficulty: session_difficulty,
            question_ids: questions.iter().map(|q| q.id.clone()).collect(),
            questions,
            answers: BTreeMap::new(),
            started_at: self.clock.now(),
            completed_at: None,
            score_fraction: None,
            duration_ms: None,
        };
        self.storage.as_ref().put_json(NS_SESSIONS, &session.session_id, &session)?;
        Ok(session)
    }

    fn sample_static(&self, topic: &str, difficulty: Difficulty, count: usize) -> Result<Vec<QuestionItem>, LearningError> {
        let corpus = self.read_corpus();
        let pool: Vec<QuestionItem> = corpus
            .knowledge
            .questions()
            .filter(|q| q.topic == topic && q.difficulty == difficulty)
            .map(QuestionItem::from)
            .collect();
        if pool.len() < count {
            return Err(LearningError::InsufficientQuestions {
                requested: count,
                available: pool.len(),
            });
        }
        let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
        Ok(pool.choose_multiple(&mut *rng, count).cloned().collect())
    }

    pub fn complete_quiz(
        &self,
        user_id: &str,
        session_id: &str,
        answers: BTreeMap<String, usize>,
    ) -> Result<QuizOutcome, LearningError> {
        let lock = self.user_lock(user_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());

        let mut session = self.session(user_id, session_id)?;
        if session.is_completed() {
            return Err(LearningError::SessionAlreadyCompleted(session_id.to_string()));
        }
        if let Some(extra) = answers.keys().find(|k| !session.question_ids.contains(k)) {
            return Err(LearningError::InvalidAnswer(format!("question '{extra}' is not part of this quiz")));
        }
        if let Some((id, choice)) = answers.iter().find(|(_, &c)| c >= OPTION_COUNT) {
            return Err(LearningError::InvalidAnswer(format!(
                "choice {choice} for '{id}' is outside 0..{OPTION_COUNT}"
            )));
        }
        let missing: Vec<String> = session
            .question_ids
            .iter()
            .filter(|id| !answers.contains_key(*id))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(LearningError::IncompleteAnswers { missing });
        }

        let completed_at = self.clock.now().max(session.started_at);
        let duration_ms = (completed_at - session.started_at).num_milliseconds();
        let (correct, total) = score_answers(&session.questions, &answers);
        let fraction = score_fraction(correct, total);
        let results = session
            .questions
            .iter()
            .map(|q| QuestionOutcome {
                question_id: q.id.clone(),
                chosen_index: answers[&q.id],
                correct_index: q.correct_index,
                correct: answers[&q.id] == q.correct_index,
            })
            .collect();
        session.answers = answers;
        session.completed_at = Some(completed_at);
        session.score_fraction = Some(fraction);
        session.duration_ms = Some(duration_ms);

        let summary = SessionSummary {
            session_id: session.session_id.clone(),
            topic: session.topic.clone(),
            difficulty: session.difficulty,
            mode: session.mode,
            correct,
            total,
            score_fraction: fraction,
            duration_ms,
            completed_at,
        };
        let mut progress = self.progress(user_id)?;
        let points_awarded = award_progress(&mut progress, &summary);
        let quote = self.pipeline.quiz_feedback_quote(fraction);

        // The session is committed first so a crash can never award twice.
        let store = self.storage.as_ref();
        store.put_json(NS_SESSIONS, &session.session_id, &session)?;
        store.put_json(NS_PROGRESS, user_id, &progress)?;
        store.append_json(LOG_QUIZ_RESULTS, &summary)?;

        Ok(QuizOutcome {
            session,
            correct,
            total,
            score_fraction: fraction,
            duration_ms,
            quote,
            points_awarded,
            results,
            progress,
        })
    }

    /// Looks a question up among ingested and previously generated items.
    pub fn question(&self, question_id: &str) -> Result<QuestionItem, LearningError> {
        if let Some(record) = self.read_corpus().knowledge.question(question_id) {
            return Ok(QuestionItem::from(record));
        }
        self.storage
            .as_ref()
            .get_json::<QuestionItem>(NS_DYNAMIC_QUESTIONS, question_id)?
            .ok_or_else(|| LearningError::QuestionNotFound(question_id.to_string()))
    }

    pub fn explain(&self, question_id: &str) -> Result<(QuestionItem, String), LearningError> {
        let item = self.question(question_id)?;
        let text = self.pipeline.explain_question(&item)?;
        Ok((item, text))
    }

    pub fn chat(&self, message: &str, history: &[ChatTurn]) -> Result<ChatReply, LearningError> {
        let corpus = self.read_corpus();
        Ok(self.pipeline.chat_reply(&corpus, message, history)?)
    }

    pub fn generate_roadmap(
        &self,
        user_id: &str,
        timeline_weeks: u32,
        topics: &[String],
        language: &str,
    ) -> Result<Roadmap, LearningError> {
        if timeline_weeks == 0 || timeline_weeks > MAX_TIMELINE_WEEKS {
            return Err(LearningError::InvalidTimeline(timeline_weeks));
        }
        let topics = normalize_topics(topics);
        if topics.is_empty() {
            return Err(LearningError::EmptyTopics);
        }
        let language = match language.trim() {
            "" => "any language".to_string(),
            l => l.to_string(),
        };

        let topics_json = serde_json::to_string(&topics).expect("strings serialize");
        let params = PromptParams::new()
            .field(protocol::PARAM_TIMELINE_WEEKS, timeline_weeks)
            .field(protocol::PARAM_TOPICS, &topics_json)
            .field(protocol::PARAM_LANGUAGE, &language);
        let exemplars = [EXAMPLE_ROADMAP.to_string()];
        let mut generated = None;
        for attempt in 1..=2 {
            let params = if attempt == 1 {
                params.clone()
            } else {
                params.clone().field("attempt", attempt)
            };
            let bundle = assemble_prompt(PromptKind::Roadmap, &exemplars, &params);
            let budget = 120 * topics.len() + 80;
            let text = match self.pipeline.complete(&bundle, STRUCTURED_TEMPERATURE, budget) {
                Ok(c) => c.text,
                Err(e) => {
                    log::warn!("roadmap generation failed, using fallback planner: {e}");
                    break;
                }
            };
            match parse_roadmap(&text).and_then(|m| validate_milestones(&m, timeline_weeks, &topics).map(|_| m)) {
                Ok(m) => {
                    generated = Some(m);
                    break;
                }
                Err(e) => log::warn!("roadmap attempt {attempt} rejected: {e}"),
            }
        }
        let (milestones, source) = match generated {
            Some(m) => (m, RoadmapSource::Generated),
            None => (fallback_milestones(timeline_weeks, &topics, &language), RoadmapSource::Fallback),
        };
        let roadmap = Roadmap {
            user_id: user_id.to_string(),
            timeline_weeks,
            language,
            milestones,
            source,
            created_at: self.clock.now(),
        };
        let lock = self.user_lock(user_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        self.storage.as_ref().put_json(NS_ROADMAPS, user_id, &roadmap)?;
        Ok(roadmap)
    }

    pub fn latest_roadmap(&self, user_id: &str) -> Result<Option<Roadmap>, LearningError> {
        Ok(self.storage.as_ref().get_json(NS_ROADMAPS, user_id)?)
    }

    pub fn tip_today(&self, user_id: &str) -> Result<DailyTip, LearningError> {
        self.tip_of_the_day(user_id, self.clock.today())
    }

    /// Generated once per (user, UTC day) and returned unchanged afterwards.
    /// Provider failures store a built-in tip for the matching condition.
    pub fn tip_of_the_day(&self, user_id: &str, date: NaiveDate) -> Result<DailyTip, LearningError> {
        let lock = self.user_lock(user_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let key = format!("{user_id}@{date}");
        let store = self.storage.as_ref();
        if let Some(tip) = store.get_json::<DailyTip>(NS_TIPS, &key)? {
            return Ok(tip);
        }

        let snapshot = ProgressSnapshot::of(&self.progress(user_id)?);
        let mut params = PromptParams::new()
            .field(protocol::PARAM_CONDITION, snapshot.condition.as_str())
            .field("quizzes_taken", snapshot.quizzes_taken)
            .field("points", snapshot.points)
            .field("streak_days", snapshot.streak_days);
        if let Some(avg) = snapshot.recent_average {
            params = params.field("recent_average", format!("{avg:.2}"));
        }
        if let Some(ms) = snapshot.average_duration_ms {
            params = params.field("average_quiz_seconds", ms / 1000);
        }
        let bundle = assemble_prompt(PromptKind::Tip, &[], &params);
        let generated = match self.pipeline.complete(&bundle, CREATIVE_TEMPERATURE, 60) {
            Ok(c) => Some(protocol::strip_label(&c.text, "TIP").to_string()).filter(|t| !t.is_empty()),
            Err(e) => {
                log::warn!("tip generation failed for {user_id}: {e}");
                None
            }
        };
        let (text, fallback) = match generated {
            Some(t) => (t, false),
            None => {
                let pool = snapshot.condition.fallback_tips();
                let pick = stable_hash(key.as_bytes()) % pool.len() as u64;
                (pool[pick as usize].to_string(), true)
            }
        };
        let tip = DailyTip {
            user_id: user_id.to_string(),
            date,
            text,
            condition: snapshot.condition,
            derived_from: snapshot.digest(),
            fallback,
        };
        store.put_json(NS_TIPS, &key, &tip)?;
        Ok(tip)
    }
}

impl std::fmt::Debug for LearningService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LearningService").field("pipeline", &self.pipeline).finish_non_exhaustive()
    }
}

