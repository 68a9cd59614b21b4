//! JSON API routes.
//!
//! ```text
//! GET  /api/session?annotator=<id>   create or resume a session
//! GET  /api/session/{id}/next        next diff, "wait" or "done"
//! POST /api/session/{id}/labels      submit {diff_id, categories, none_flag, comment}
//! GET  /api/metrics                  coverage, alpha per category, rule scores
//! GET  /api/definitions              category wording shown to annotators
//! ```

use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};

use sentqual_core::Category;

use crate::state::{Study, StudyError, Submission};

pub type Shared = Arc<Mutex<Study>>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        let status = match &self {
            StudyError::EmptyAnnotator => StatusCode::BAD_REQUEST,
            StudyError::UnknownSession(_) => StatusCode::NOT_FOUND,
            StudyError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StudyError::Duplicate { .. } | StudyError::NotAssigned(_) => StatusCode::CONFLICT,
            StudyError::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

#[derive(Deserialize)]
struct SessionQuery {
    #[serde(default)]
    annotator: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Definition {
    pub category: Category,
    pub title: String,
    pub description: String,
}

pub fn definitions() -> Vec<Definition> {
    let entry = |category, title: &str, description: &str| Definition {
        category,
        title: title.to_string(),
        description: description.to_string(),
    };
    vec![
        entry(
            Category::Citation,
            "Needs a source",
            "The old text made a factual claim with no supporting reference, and the edit adds one.",
        ),
        entry(
            Category::PointOfView,
            "Not neutral",
            "The old text took sides, used loaded or promotional wording, or presented an opinion as fact, and the edit makes it neutral.",
        ),
        entry(
            Category::Clarification,
            "Unclear or vague",
            "The old text was ambiguous, too vague or hard to follow, and the edit adds a few words to make its meaning precise.",
        ),
    ]
}

fn lock(state: &Shared) -> std::sync::MutexGuard<'_, Study> {
    // a panic while holding the lock leaves the study consistent: every
    // mutation is applied after its log write succeeds
    state.lock().unwrap_or_else(|p| p.into_inner())
}

async fn create_session(State(state): State<Shared>, Query(q): Query<SessionQuery>) -> Response {
    match lock(&state).create_session(&q.annotator, Utc::now()) {
        Ok(session) => Json(session).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn next(State(state): State<Shared>, Path(id): Path<String>) -> Response {
    match lock(&state).next_diff(&id, Utc::now()) {
        Ok(next) => Json(next).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn submit(State(state): State<Shared>, Path(id): Path<String>, Json(body): Json<Submission>) -> Response {
    match lock(&state).submit(&id, body, Utc::now()) {
        Ok(ack) => Json(ack).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn metrics(State(state): State<Shared>) -> Response {
    Json(lock(&state).metrics()).into_response()
}

async fn list_definitions() -> Json<Vec<Definition>> {
    Json(definitions())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/session", get(create_session))
        .route("/api/session/{id}/next", get(next))
        .route("/api/session/{id}/labels", post(submit))
        .route("/api/metrics", get(metrics))
        .route("/api/definitions", get(list_definitions))
        .with_state(state)
}
