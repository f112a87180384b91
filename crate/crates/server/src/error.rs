use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use relis_core::Error;
use serde::Serialize;
use serde_json::Value;

/// Error envelope of every failed request.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    pub details: Vec<Value>,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status_of(code).as_u16(),
            code: code.to_string(),
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn unknown_entity(entity: &str) -> Self {
        Self::new("E_UNKNOWN_ENTITY", format!("no entity named `{entity}`"))
    }

    pub fn unknown_op(entity: &str, op: &str) -> Self {
        Self::new("E_UNKNOWN_OP", format!("entity `{entity}` does not support `{op}`"))
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new("E_FORBIDDEN", message)
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self::new("E_FORMAT", message)
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new("E_NOT_FOUND", format!("{what} not found"))
    }
}

/// HTTP status of a machine code.
pub fn status_of(code: &str) -> StatusCode {
    match code {
        "E_NOT_FOUND" | "E_UNKNOWN_ENTITY" => StatusCode::NOT_FOUND,
        "E_UNKNOWN_OP" => StatusCode::METHOD_NOT_ALLOWED,
        "E_FORBIDDEN" | "E_NOT_ASSIGNED" => StatusCode::FORBIDDEN,
        "E_BAD_CREDENTIALS" | "E_EXPIRED" => StatusCode::UNAUTHORIZED,
        "E_INVALID_MODEL" | "E_CONSTRAINT" | "E_MANDATORY_MISSING" | "E_DEP_VIOLATION" | "E_MULTIPLICITY"
        | "E_BAD_PAYLOAD" | "E_CRITERION_REQUIRED" | "E_CRITERION_ON_INCLUDE" | "E_NOT_INCLUDED"
        | "E_INVALID_PLAN" => StatusCode::UNPROCESSABLE_ENTITY,
        "E_NAME_TAKEN" | "E_LOGIN_TAKEN" | "E_VERSION_STALE" | "E_VERSION_CONFLICT" | "E_STALE_SCHEMA"
        | "E_ILLEGAL_DROP" | "E_DUPLICATE" | "E_DUPLICATE_CHOICE" | "E_PHASE_CLOSED" | "E_ELEMENT_INACTIVE"
        | "E_LAST_ADMIN" | "E_IN_USE" => StatusCode::CONFLICT,
        "E_STORAGE" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = e.code();
        let details = match &e {
            Error::InvalidModel(diags) => diags.iter().filter_map(|d| serde_json::to_value(d).ok()).collect(),
            Error::Classification(v) => v.iter().filter_map(|v| serde_json::to_value(v).ok()).collect(),
            _ => Vec::new(),
        };
        let message = match &e {
            Error::Storage(inner) => {
                tracing::error!(error = %inner, "storage failure");
                "internal storage failure".to_string()
            }
            other => other.to_string(),
        };
        Self {
            details,
            ..Self::new(code, message)
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
