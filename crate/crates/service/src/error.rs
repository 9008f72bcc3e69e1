//! Mapping of domain failures onto HTTP status codes and JSON error bodies.
//!
//! | failure                                   | status |
//! |-------------------------------------------|--------|
//! | malformed body or query, invalid input    | 400    |
//! | missing, invalid or expired token; login  | 401    |
//! | unknown session, question or route        | 404    |
//! | no exemplars for the requested topic      | 404    |
//! | duplicate user, quiz already submitted    | 409    |
//! | provider output unparseable after retry   | 502    |
//! | provider unavailable                      | 503    |
//! | storage or index failure                  | 500    |

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use codepace_core::learning::LearningError;
use codepace_core::provider::ProviderError;
use codepace_core::rag::RagError;
use serde_json::json;

use crate::auth::AuthError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", AuthError::Unauthorized.to_string())
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{} {}: {}", self.status.as_u16(), self.code, self.message);
        }
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<AuthError> for ApiError {
    fn from(e: AuthError) -> Self {
        let message = e.to_string();
        match e {
            AuthError::InvalidUsername | AuthError::WeakPassword => ApiError::bad_request(message),
            AuthError::UserExists(_) => ApiError::new(StatusCode::CONFLICT, "user_exists", message),
            AuthError::InvalidCredentials => ApiError::new(StatusCode::UNAUTHORIZED, "invalid_credentials", message),
            AuthError::Unauthorized => ApiError::unauthorized(),
            AuthError::Storage(_) => ApiError::internal(message),
        }
    }
}

impl From<RagError> for ApiError {
    fn from(e: RagError) -> Self {
        let message = e.to_string();
        match e {
            RagError::NoExemplars { .. } => ApiError::new(StatusCode::NOT_FOUND, "no_exemplars", message),
            RagError::GenerationUnparseable(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "generation_unparseable", message)
            }
            RagError::Provider(ProviderError::InvalidConfig(_)) => ApiError::internal(message),
            RagError::Provider(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable", message),
            RagError::EmptyMessage => ApiError::bad_request(message),
            RagError::Index(_) | RagError::InvalidQuestion(_) => ApiError::internal(message),
        }
    }
}

impl From<LearningError> for ApiError {
    fn from(e: LearningError) -> Self {
        let message = e.to_string();
        match e {
            LearningError::InvalidCount(_)
            | LearningError::InvalidAnswer(_)
            | LearningError::EmptyTopics
            | LearningError::InvalidTimeline(_) => ApiError::bad_request(message),
            LearningError::InsufficientQuestions { .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, "insufficient_questions", message)
            }
            LearningError::IncompleteAnswers { .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, "incomplete_answers", message)
            }
            LearningError::SessionNotFound(_) | LearningError::QuestionNotFound(_) => ApiError::not_found(message),
            LearningError::SessionAlreadyCompleted(_) => {
                ApiError::new(StatusCode::CONFLICT, "session_already_completed", message)
            }
            LearningError::Rag(e) => e.into(),
            LearningError::Storage(_) => ApiError::internal(message),
        }
    }
}
