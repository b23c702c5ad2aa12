use aida_session::SessionError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

/// JSON error body `{"error": {"code", "message"}}` with an HTTP status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id:?}"))
    }

    pub fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "busy", "a frame is already being processed for this session")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::UnknownEnvironment(_) => (StatusCode::BAD_REQUEST, "unknown_environment"),
            SessionError::NoFrame => (StatusCode::CONFLICT, "no_frame"),
            SessionError::SingleClass => (StatusCode::CONFLICT, "single_class"),
            SessionError::NoGenerator => (StatusCode::CONFLICT, "no_generator"),
            SessionError::InvalidFrame(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_frame"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": { "code": self.code, "message": self.message } }))).into_response()
    }
}
