//! HTTP service for live judgment sessions.
//!
//! Three endpoints, all authenticated with an evaluator's bearer token:
//!
//! - `GET /campaigns/{id}/next` returns the evaluator's next node to judge,
//!   or a `done` payload with progress counts.
//! - `POST /campaigns/{id}/judgments` records one answer. A client-chosen
//!   `idempotency_key` makes retries safe: a repeated key returns the
//!   original response and writes nothing.
//! - `GET /campaigns/{id}/reports/{kind}` renders a report from the latest
//!   snapshot, byte-identical to the offline rendering.
//!
//! No endpoint changes campaign configuration.

// errors carry ids and paths for the operator; they are built on failure paths only
#![allow(clippy::result_large_err)]

mod error;
mod payload;
mod state;

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hiereval::report::{self, ReportKind};
use tokio::net::TcpListener;

pub use error::ApiError;
pub use payload::{JudgmentRequest, NextPayload};
pub use state::{progress, AppState, CampaignHandle, Progress, ServeError};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/campaigns/{id}/next", get(next_task))
        .route("/campaigns/{id}/judgments", post(post_judgment))
        .route("/campaigns/{id}/reports/{kind}", get(get_report))
        .fallback(|| async {
            ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
        })
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener, state: AppState) -> Result<(), ServeError> {
    let addr: SocketAddr = listener.local_addr()?;
    let ids: Vec<&str> = state.campaign_ids().collect();
    tracing::info!(%addr, campaigns = ?ids, "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Resolves the bearer token to an evaluator of this campaign.
fn authenticate(handle: &CampaignHandle, headers: &HeaderMap) -> Result<String, ApiError> {
    let token = headers
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .ok_or_else(ApiError::unauthorized)?;
    handle
        .snapshot()
        .campaign()
        .evaluator_by_token(token)
        .map(|e| e.id.clone())
        .ok_or_else(ApiError::unauthorized)
}

async fn next_task(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let handle = app.campaign(&id)?;
    let evaluator = authenticate(handle, &headers)?;
    let engine = handle.snapshot();
    let payload = payload::next_payload(&engine, &evaluator)?;
    Ok(Json(payload).into_response())
}

async fn post_judgment(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let handle = app.campaign(&id)?;
    let evaluator = authenticate(handle, &headers)?;
    let req = JudgmentRequest::parse(&body)?;
    let response = handle.submit(&evaluator, req).await?;
    Ok(Json(response).into_response())
}

async fn get_report(
    State(app): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let handle = app.campaign(&id)?;
    authenticate(handle, &headers)?;
    let kind: ReportKind = kind.parse().map_err(|e: report::UnknownReportKind| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "unknown_report_kind",
            e.to_string(),
        )
        .with_field("kind")
    })?;
    let body = report::build(&handle.snapshot(), kind).to_json();
    Ok(([(CONTENT_TYPE, "application/json")], body).into_response())
}
