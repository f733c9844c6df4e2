//! Route table and handlers. Every state-changing handler returns exactly
//! what the session manager returned.

use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokensteer_core::expander::AlternativePreview;
use tokensteer_core::session::{
    Direction, FinalizeAction, FinalizeOutcome, InteractionEvent, NavigateOutcome,
    SessionManager, SessionView,
};

use crate::error::ApiError;
use crate::sse;

pub type AppState = Arc<SessionManager>;

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Body<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
pub struct PathArgs<T>(pub T);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub document: String,
    /// Cursor position in characters.
    pub cursor_offset: usize,
    #[serde(default)]
    pub language_hint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectBody {
    pub step_index: usize,
    pub alt_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HideBody {
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativesResponse {
    pub step: usize,
    pub alternatives: Vec<AlternativePreview>,
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/complete", post(complete))
        .route("/sessions/{id}/steps/{step}/alternatives", get(alternatives))
        .route("/sessions/{id}/select", post(select))
        .route("/sessions/{id}/hide", post(hide))
        .route("/sessions/{id}/back", post(back))
        .route("/sessions/{id}/forward", post(forward))
        .route("/sessions/{id}/accept", post(accept))
        .route("/sessions/{id}/dismiss", post(dismiss))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/events", get(sse::events))
        .with_state(state)
}

async fn create_session(
    State(mgr): State<AppState>,
    Body(req): Body<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let view = mgr.create_session(&req.document, req.cursor_offset, &req.language_hint)?;
    tracing::info!(session = %view.session_id, "session created");
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(mgr): State<AppState>, PathArgs(id): PathArgs<String>) -> ApiResult<SessionView> {
    Ok(Json(mgr.get(&id)?))
}

async fn complete(State(mgr): State<AppState>, PathArgs(id): PathArgs<String>) -> ApiResult<SessionView> {
    Ok(Json(mgr.run_completion(&id).await?))
}

async fn alternatives(
    State(mgr): State<AppState>,
    PathArgs((id, step)): PathArgs<(String, usize)>,
) -> ApiResult<AlternativesResponse> {
    let alternatives = mgr.list_alternatives(&id, step)?;
    Ok(Json(AlternativesResponse { step, alternatives }))
}

async fn select(
    State(mgr): State<AppState>,
    PathArgs(id): PathArgs<String>,
    Body(req): Body<SelectBody>,
) -> ApiResult<SessionView> {
    Ok(Json(mgr.select_alternative(&id, req.step_index, req.alt_rank).await?))
}

async fn hide(
    State(mgr): State<AppState>,
    PathArgs(id): PathArgs<String>,
    Body(req): Body<HideBody>,
) -> ApiResult<SessionView> {
    Ok(Json(mgr.hide_highlight(&id, req.step_index).await?))
}

async fn back(State(mgr): State<AppState>, PathArgs(id): PathArgs<String>) -> ApiResult<NavigateOutcome> {
    Ok(Json(mgr.navigate(&id, Direction::Back).await?))
}

async fn forward(State(mgr): State<AppState>, PathArgs(id): PathArgs<String>) -> ApiResult<NavigateOutcome> {
    Ok(Json(mgr.navigate(&id, Direction::Forward).await?))
}

async fn accept(State(mgr): State<AppState>, PathArgs(id): PathArgs<String>) -> ApiResult<FinalizeOutcome> {
    Ok(Json(mgr.finalize(&id, FinalizeAction::Accept).await?))
}

async fn dismiss(State(mgr): State<AppState>, PathArgs(id): PathArgs<String>) -> ApiResult<FinalizeOutcome> {
    Ok(Json(mgr.finalize(&id, FinalizeAction::Dismiss).await?))
}

async fn log(State(mgr): State<AppState>, PathArgs(id): PathArgs<String>) -> ApiResult<Vec<InteractionEvent>> {
    Ok(Json(mgr.events(&id)?))
}
