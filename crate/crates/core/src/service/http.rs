//! axum transport for the recourse API, versioned under `/v1`.

use std::path::Path;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tower_http::cors::CorsLayer;

use super::{recourse, ApiError, AppState, RecourseRequest, Snapshot};
use crate::error::{Error, Result};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/schema", get(schema))
        .route("/v1/recourse", post(recourse_handler))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

fn error_body(status: StatusCode, code: &str, message: String) -> Response {
    (status, Json(json!({"error": code, "message": message}))).into_response()
}

fn not_loaded() -> Response {
    error_body(
        StatusCode::SERVICE_UNAVAILABLE,
        "loading",
        "artifacts are not loaded yet".into(),
    )
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        error_body(status, self.error().code(), self.to_string())
    }
}

async fn health(State(state): State<AppState>) -> Response {
    match state.current() {
        Some(s) => Json(json!({"status": "ok", "model": s.info()})).into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"status": "loading"}))).into_response(),
    }
}

async fn schema(State(state): State<AppState>) -> Response {
    match state.current() {
        Some(s) => Json(s.schema_view()).into_response(),
        None => not_loaded(),
    }
}

async fn recourse_handler(
    State(state): State<AppState>,
    body: Result<Json<RecourseRequest>, JsonRejection>,
) -> Response {
    let Some(snap) = state.current() else {
        return not_loaded();
    };
    let req = match body {
        Ok(Json(r)) => r,
        Err(JsonRejection::MissingJsonContentType(e)) => {
            return error_body(StatusCode::UNSUPPORTED_MEDIA_TYPE, "content_type", e.body_text())
        }
        Err(e) => return error_body(StatusCode::BAD_REQUEST, "bad_request", e.body_text()),
    };
    match tokio::task::spawn_blocking(move || recourse(&snap, &req)).await {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => error_body(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}

/// Binds first, then loads `dir` in the background so `/v1/health`
/// answers 503 until the snapshot is installed. A failed load stops the server.
pub async fn serve(addr: &str, dir: &Path) -> Result<()> {
    let state = AppState::default();
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Invalid(format!("bind {addr}: {e}")))?;
    log::info!("listening on {addr}");
    let (failed, on_failure) = tokio::sync::oneshot::channel();
    let loader = state.clone();
    let dir = dir.to_path_buf();
    tokio::task::spawn_blocking(move || match Snapshot::load_dir(&dir) {
        Ok(s) => {
            loader.install(s);
            log::info!("artifacts loaded from {}", dir.display());
        }
        Err(e) => {
            let _ = failed.send(e);
        }
    });
    let server = axum::serve(listener, router(state)).with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    });
    tokio::select! {
        r = server => r.map_err(|e| Error::Invalid(format!("server: {e}"))),
        Ok(e) = on_failure => Err(e),
    }
}

pub fn serve_dir(addr: &str, dir: &Path) -> Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Invalid(format!("runtime: {e}")))?
        .block_on(serve(addr, dir))
}
