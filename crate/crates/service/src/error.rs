use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// Errors of the HTTP layer, each mapped to one status code.
#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session `{0}`")]
    NotFound(String),
    #[error("stale version: expected {expected}, session is at {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("{message}")]
    Invalid {
        field: Option<String>,
        message: String,
    },
    #[error("upload exceeds the {limit}-byte limit")]
    TooLarge { limit: usize },
    #[error(transparent)]
    Core(#[from] rpys_core::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    current_version: Option<u64>,
}

impl ApiError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        ApiError::Invalid {
            field: Some(field.to_owned()),
            message: message.into(),
        }
    }

    pub fn status(&self) -> StatusCode {
        use rpys_core::Error as E;
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict { .. } => StatusCode::CONFLICT,
            ApiError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::Core(E::Io { .. }) | ApiError::Internal(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            ApiError::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    fn code(&self) -> &'static str {
        use rpys_core::Error as E;
        match self {
            ApiError::NotFound(_) => "not_found",
            ApiError::Conflict { .. } => "version_conflict",
            ApiError::Invalid { .. } | ApiError::Core(E::InvalidArgument { .. }) => {
                "invalid_argument"
            }
            ApiError::TooLarge { .. } => "too_large",
            ApiError::Core(E::Refused(_)) => "refused",
            ApiError::Core(
                E::MissingHeader
                | E::TruncatedRecord { .. }
                | E::DuplicateRecord { .. }
                | E::UnsupportedVersion { .. }
                | E::Integrity(_),
            ) => "invalid_file",
            ApiError::Core(E::EmptyGraph(_)) => "empty_graph",
            ApiError::Core(_) | ApiError::Internal(_) => "internal",
        }
    }

    fn field(&self) -> Option<String> {
        use rpys_core::Error as E;
        match self {
            ApiError::Invalid { field, .. } => field.clone(),
            ApiError::Core(E::InvalidArgument { field, .. }) => Some(field.clone()),
            ApiError::Core(
                E::MissingHeader
                | E::TruncatedRecord { .. }
                | E::DuplicateRecord { .. }
                | E::UnsupportedVersion { .. }
                | E::Integrity(_),
            ) => Some("file".into()),
            _ => None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        let body = Body {
            error: self.code(),
            message: self.to_string(),
            field: self.field(),
            current_version: match self {
                ApiError::Conflict { current, .. } => Some(current),
                _ => None,
            },
        };
        (status, Json(body)).into_response()
    }
}
