use axum::http::header::CONTENT_TYPE;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use hiereval::campaign::CampaignError;
use serde::Serialize;

/// Error body: `{"error": {"code", "message", "field"?}}`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

#[derive(Serialize)]
struct Body<'a> {
    error: Detail<'a>,
}

#[derive(Serialize)]
struct Detail<'a> {
    code: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn unauthorized() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or unknown bearer token",
        )
    }

    pub fn campaign_not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "campaign_not_found",
            format!("no campaign '{id}'"),
        )
    }

    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message).with_field(field)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&Body {
            error: Detail {
                code: self.code,
                message: &self.message,
                field: self.field.as_deref(),
            },
        })
        .expect("error bodies serialize")
    }
}

impl From<CampaignError> for ApiError {
    fn from(e: CampaignError) -> Self {
        let message = e.to_string();
        match e {
            // the client should refetch the next task
            CampaignError::StaleNode { .. } => {
                Self::new(StatusCode::CONFLICT, "stale_node", message).with_field("node_id")
            }
            CampaignError::AlreadyTerminated { .. } => {
                Self::new(StatusCode::CONFLICT, "already_terminated", message)
            }
            CampaignError::UnknownAnswer { .. } => Self::validation("answer", message),
            CampaignError::InvalidElapsed(_) => Self::validation("elapsed_seconds", message),
            CampaignError::NoTraversal { .. } => Self::validation("item_id", message),
            CampaignError::UnknownEvaluator(_) => Self::unauthorized(),
            other => Self::internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = self.to_json();
        (self.status, [(CONTENT_TYPE, "application/json")], body).into_response()
    }
}
