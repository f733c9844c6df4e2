use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use tokensteer_core::session::SessionError;

/// Error body: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad-request",
            message: message.into(),
        }
    }
}

/// Status and code for each session error. Kept in step with the table in
/// `docs/api.md`.
pub fn classify(e: &SessionError) -> (StatusCode, &'static str) {
    match e {
        SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown-session"),
        SessionError::InvalidId(_) => (StatusCode::BAD_REQUEST, "invalid-session-id"),
        SessionError::DuplicateSession(_) => (StatusCode::CONFLICT, "duplicate-session"),
        SessionError::BadOffset { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "bad-offset"),
        SessionError::NotActive(_) => (StatusCode::CONFLICT, "session-not-active"),
        SessionError::NoCompletion => (StatusCode::CONFLICT, "no-completion"),
        SessionError::UnknownStep { .. } => (StatusCode::NOT_FOUND, "unknown-step"),
        SessionError::InvalidAlternative { .. } => {
            (StatusCode::UNPROCESSABLE_ENTITY, "invalid-alternative")
        }
        SessionError::SelectionFailed(_) => (StatusCode::BAD_GATEWAY, "regeneration-failed"),
        SessionError::Backend(_) => (StatusCode::BAD_GATEWAY, "backend-failed"),
        SessionError::Log(_) => (StatusCode::INTERNAL_SERVER_ERROR, "log-unavailable"),
        SessionError::ReplayMismatch { .. } => {
            (StatusCode::INTERNAL_SERVER_ERROR, "replay-mismatch")
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = classify(&e);
        ApiError {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::warn!(code = self.code, message = %self.message, "request failed");
        }
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<axum::extract::rejection::JsonRejection> for ApiError {
    fn from(r: axum::extract::rejection::JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<axum::extract::rejection::PathRejection> for ApiError {
    fn from(r: axum::extract::rejection::PathRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}
