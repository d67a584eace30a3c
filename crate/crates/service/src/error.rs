use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Map, Value};
use velocity_core::market::{INSUFFICIENT_POOL, INVALID_MARGIN};

/// Error body: `{"error": CODE, "message": text, ...details}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Map<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.to_owned(), value.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", message)
    }

    pub fn unknown_account(account: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UNKNOWN_ACCOUNT", format!("no account `{account}`"))
    }

    pub fn invalid_margin(block: u64) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_MARGIN", INVALID_MARGIN).with("block", block)
    }

    pub fn insufficient_pool(block: u64) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "INSUFFICIENT_POOL", INSUFFICIENT_POOL).with("block", block)
    }

    pub fn rejected(block: u64, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "TX_REJECTED", message).with("block", block)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "WRONG_MODE", message)
    }

    pub fn unavailable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "UNAVAILABLE", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = Map::new();
        body.insert("error".into(), json!(self.code));
        body.insert("message".into(), json!(self.message));
        body.extend(self.details);
        (self.status, Json(Value::Object(body))).into_response()
    }
}
