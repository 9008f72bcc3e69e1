//! JSON endpoints. Every route except registration, login and health
//! requires `Authorization: Bearer <token>`.

use std::collections::{BTreeMap, HashMap};

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, NaiveDate, Utc};
use codepace_core::learning::{
    DailyTip, QuestionOutcome, QuizMode, QuizOutcome, QuizSession, Roadmap, SessionSummary, TipCondition, UserProgress,
};
use codepace_core::rag::{ChatTurn, FeedbackQuote, QuestionItem, QuestionOrigin};
use codepace_core::Difficulty;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::app::AppState;
use crate::error::ApiError;

/// Quiz sessions returned by the history view in `/api/progress`.
pub const RECENT_HISTORY: usize = 10;
pub const DEFAULT_STATIC_COUNT: usize = 5;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/auth/register", post(register))
        .route("/api/auth/login", post(login))
        .route("/api/quiz/static", get(static_quiz))
        .route("/api/quiz/dynamic", post(dynamic_quiz))
        .route("/api/quiz/{session_id}/submit", post(submit_quiz))
        .route("/api/questions/{id}/explain", get(explain))
        .route("/api/chat", post(chat))
        .route("/api/roadmap", post(roadmap))
        .route("/api/tip", get(tip))
        .route("/api/progress", get(progress))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

/// Authenticated user id, taken from the bearer token.
pub struct AuthUser(pub String);

impl FromRequestParts<AppState> for AuthUser {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or_else(ApiError::unauthorized)?
            .to_string();
        let auth = state.auth.clone();
        let user = blocking(move || auth.authenticate(&token).map_err(ApiError::from)).await?;
        Ok(AuthUser(user))
    }
}

/// Runs domain work off the async executor; providers may block on I/O.
async fn blocking<T, F>(work: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

/// Strict JSON body decoding so malformed input is a 400 with a reason.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    if body.is_empty() {
        return Err(ApiError::bad_request("request body must be a JSON object"));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn parse_difficulty(value: &str) -> Result<Difficulty, ApiError> {
    value.parse().map_err(|e: codepace_core::types::UnknownVariant| ApiError::bad_request(e.to_string()))
}

// ---- views ----------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct QuestionView {
    pub id: String,
    pub topic: String,
    pub difficulty: Difficulty,
    pub stem: String,
    pub options: Vec<String>,
    pub origin: QuestionOrigin,
}

impl From<&QuestionItem> for QuestionView {
    fn from(q: &QuestionItem) -> Self {
        QuestionView {
            id: q.id.clone(),
            topic: q.topic.clone(),
            difficulty: q.difficulty,
            stem: q.stem.clone(),
            options: q.options.clone(),
            origin: q.origin,
        }
    }
}

/// A quiz as served to the learner: answers and explanations withheld.
#[derive(Debug, Serialize, Deserialize)]
pub struct QuizView {
    pub session_id: String,
    pub mode: QuizMode,
    pub topic: String,
    pub difficulty: Difficulty,
    pub started_at: DateTime<Utc>,
    pub questions: Vec<QuestionView>,
}

impl From<&QuizSession> for QuizView {
    fn from(s: &QuizSession) -> Self {
        QuizView {
            session_id: s.session_id.clone(),
            mode: s.mode,
            topic: s.topic.clone(),
            difficulty: s.difficulty,
            started_at: s.started_at,
            questions: s.questions.iter().map(QuestionView::from).collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QuestionResultView {
    pub question_id: String,
    pub chosen_index: usize,
    pub correct_index: usize,
    pub correct: bool,
    pub explanation: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProgressView {
    pub user_id: String,
    pub points: u64,
    pub streak_days: u32,
    pub last_active_date: Option<NaiveDate>,
    pub quizzes_taken: usize,
    pub averages: Vec<AverageView>,
    pub recent: Vec<SessionSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AverageView {
    pub topic: String,
    pub difficulty: Difficulty,
    pub quizzes: u32,
    pub average: f64,
}

impl From<&UserProgress> for ProgressView {
    fn from(p: &UserProgress) -> Self {
        let averages = p
            .averages
            .iter()
            .flat_map(|(topic, by_level)| {
                by_level.iter().map(move |(difficulty, stat)| AverageView {
                    topic: topic.clone(),
                    difficulty: *difficulty,
                    quizzes: stat.quizzes,
                    average: stat.average,
                })
            })
            .collect();
        let start = p.history.len().saturating_sub(RECENT_HISTORY);
        ProgressView {
            user_id: p.user_id.clone(),
            points: p.points,
            streak_days: p.streak_days,
            last_active_date: p.last_active_date,
            quizzes_taken: p.history.len(),
            averages,
            recent: p.history[start..].iter().rev().cloned().collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QuizResultView {
    pub session_id: String,
    pub score_fraction: f64,
    pub correct: usize,
    pub total: usize,
    pub duration_ms: i64,
    pub started_at: DateTime<Utc>,
    pub completed_at: DateTime<Utc>,
    pub points_awarded: u64,
    pub quote: FeedbackQuote,
    pub results: Vec<QuestionResultView>,
    pub progress: ProgressView,
}

impl From<&QuizOutcome> for QuizResultView {
    fn from(o: &QuizOutcome) -> Self {
        let explanation = |r: &QuestionOutcome| {
            o.session
                .questions
                .iter()
                .find(|q| q.id == r.question_id)
                .map(|q| q.explanation.clone())
                .unwrap_or_default()
        };
        QuizResultView {
            session_id: o.session.session_id.clone(),
            score_fraction: o.score_fraction,
            correct: o.correct,
            total: o.total,
            duration_ms: o.duration_ms,
            started_at: o.session.started_at,
            completed_at: o.session.completed_at.unwrap_or(o.session.started_at),
            points_awarded: o.points_awarded,
            quote: o.quote.clone(),
            results: o
                .results
                .iter()
                .map(|r| QuestionResultView {
                    question_id: r.question_id.clone(),
                    chosen_index: r.chosen_index,
                    correct_index: r.correct_index,
                    correct: r.correct,
                    explanation: explanation(r),
                })
                .collect(),
            progress: ProgressView::from(&o.progress),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TipView {
    pub date: NaiveDate,
    pub text: String,
    pub condition: TipCondition,
    pub derived_from: String,
    pub fallback: bool,
}

impl From<DailyTip> for TipView {
    fn from(t: DailyTip) -> Self {
        TipView {
            date: t.date,
            text: t.text,
            condition: t.condition,
            derived_from: t.derived_from,
            fallback: t.fallback,
        }
    }
}

// ---- requests -------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Credentials {
    username: String,
    password: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicQuizRequest {
    topic: String,
    difficulty: String,
    count: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitRequest {
    answers: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatRequest {
    message: String,
    #[serde(default)]
    history: Vec<ChatTurn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RoadmapRequest {
    timeline_weeks: u32,
    topics: Vec<String>,
    #[serde(default)]
    language: String,
}

// ---- handlers -------------------------------------------------------------

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

async fn register(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let creds: Credentials = parse_body(&body)?;
    let auth = state.auth.clone();
    let user = blocking(move || Ok(auth.register(creds.username.trim(), &creds.password)?)).await?;
    Ok((
        StatusCode::CREATED,
        Json(serde_json::json!({"user_id": user.user_id, "created_at": user.created_at})),
    ))
}

async fn login(State(state): State<AppState>, body: Bytes) -> Result<Json<serde_json::Value>, ApiError> {
    let creds: Credentials = parse_body(&body)?;
    let auth = state.auth.clone();
    let token = blocking(move || Ok(auth.login(creds.username.trim(), &creds.password)?)).await?;
    Ok(Json(serde_json::to_value(token).map_err(|e| ApiError::internal(e.to_string()))?))
}

async fn static_quiz(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Json<QuizView>, ApiError> {
    let topic = query
        .get("topic")
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| ApiError::bad_request("query parameter 'topic' is required"))?
        .clone();
    let difficulty = parse_difficulty(
        query
            .get("difficulty")
            .ok_or_else(|| ApiError::bad_request("query parameter 'difficulty' is required"))?,
    )?;
    let count = match query.get("count") {
        None => DEFAULT_STATIC_COUNT,
        Some(c) => c
            .parse()
            .map_err(|_| ApiError::bad_request("query parameter 'count' must be a non-negative integer"))?,
    };
    let learning = state.learning.clone();
    let session =
        blocking(move || Ok(learning.start_quiz(&user, &topic, difficulty, QuizMode::Static, count)?)).await?;
    Ok(Json(QuizView::from(&session)))
}

async fn dynamic_quiz(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    body: Bytes,
) -> Result<Json<QuizView>, ApiError> {
    let request: DynamicQuizRequest = parse_body(&body)?;
    let difficulty = parse_difficulty(&request.difficulty)?;
    if request.topic.trim().is_empty() {
        return Err(ApiError::bad_request("'topic' must not be empty"));
    }
    let learning = state.learning.clone();
    let session = blocking(move || {
        Ok(learning.start_quiz(&user, &request.topic, difficulty, QuizMode::Dynamic, request.count)?)
    })
    .await?;
    Ok(Json(QuizView::from(&session)))
}

async fn submit_quiz(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    Path(session_id): Path<String>,
    body: Bytes,
) -> Result<Json<QuizResultView>, ApiError> {
    let request: SubmitRequest = parse_body(&body)?;
    let learning = state.learning.clone();
    let outcome = blocking(move || Ok(learning.complete_quiz(&user, &session_id, request.answers)?)).await?;
    Ok(Json(QuizResultView::from(&outcome)))
}

async fn explain(
    State(state): State<AppState>,
    AuthUser(_user): AuthUser,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let learning = state.learning.clone();
    let (item, text) = blocking(move || Ok(learning.explain(&id)?)).await?;
    Ok(Json(serde_json::json!({
        "question_id": item.id,
        "origin": item.origin,
        "explanation": text,
    })))
}

async fn chat(
    State(state): State<AppState>,
    AuthUser(_user): AuthUser,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let request: ChatRequest = parse_body(&body)?;
    let learning = state.learning.clone();
    let reply = blocking(move || Ok(learning.chat(&request.message, &request.history)?)).await?;
    Ok(Json(serde_json::json!({
        "reply": reply.text,
        "grounded": reply.grounded,
        "source_tags": reply.source_tags,
        "top_score": reply.top_score,
    })))
}

async fn roadmap(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    body: Bytes,
) -> Result<Json<Roadmap>, ApiError> {
    let request: RoadmapRequest = parse_body(&body)?;
    let learning = state.learning.clone();
    let roadmap = blocking(move || {
        Ok(learning.generate_roadmap(&user, request.timeline_weeks, &request.topics, &request.language)?)
    })
    .await?;
    Ok(Json(roadmap))
}

async fn tip(State(state): State<AppState>, AuthUser(user): AuthUser) -> Result<Json<TipView>, ApiError> {
    let learning = state.learning.clone();
    let tip = blocking(move || Ok(learning.tip_today(&user)?)).await?;
    Ok(Json(TipView::from(tip)))
}

async fn progress(State(state): State<AppState>, AuthUser(user): AuthUser) -> Result<Json<ProgressView>, ApiError> {
    let learning = state.learning.clone();
    let progress = blocking(move || Ok(learning.progress(&user)?)).await?;
    Ok(Json(ProgressView::from(&progress)))
}
