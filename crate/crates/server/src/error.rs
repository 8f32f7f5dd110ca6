use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use gesturegen_core::agents::AgentError;
use gesturegen_core::session::{SessionError, SessionStatus, StoreError};

/// Error body: `{"error": {"code": "...", "message": "...", "session_id"?: "..."}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub session_id: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            session_id: None,
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }

    pub fn busy(id: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "BUSY",
            format!("session {id} is already processing a request"),
        )
    }

    pub fn for_session(mut self, id: &str) -> Self {
        self.session_id = Some(id.to_string());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({"code": self.code, "message": self.message});
        if let Some(id) = self.session_id {
            error["session_id"] = id.into();
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) | StoreError::InvalidId(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", e.to_string())
            }
            StoreError::SchemaVersionMismatch { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "SCHEMA_MISMATCH", e.to_string())
            }
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "STORE", e.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::IterationLimitExceeded { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ITERATION_LIMIT", msg)
            }
            SessionError::InvalidState {
                status: SessionStatus::Refining | SessionStatus::Analyzing,
                ..
            } => ApiError::new(StatusCode::CONFLICT, "BUSY", msg),
            SessionError::InvalidState { .. } => ApiError::new(StatusCode::CONFLICT, "INVALID_STATE", msg),
            SessionError::EmptyFeedback => ApiError::bad_request("EMPTY_FEEDBACK", msg),
            SessionError::NoFeasibleIteration => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "NO_FEASIBLE_ITERATION", msg)
            }
            SessionError::Agent(AgentError::InvalidInput(_)) => ApiError::bad_request("INVALID_INPUT", msg),
            SessionError::Agent(_) => ApiError::new(StatusCode::BAD_GATEWAY, "BACKEND_FAILED", msg),
            SessionError::Trajectory(_) => ApiError::bad_request("INVALID_RATE", msg),
            SessionError::Metrics(_) | SessionError::Export(_) | SessionError::Demonstrations(_) => {
                ApiError::internal(msg)
            }
        }
    }
}
