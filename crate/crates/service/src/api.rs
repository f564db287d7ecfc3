use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use spadal::dataset::GroupId;
use tower_http::services::ServeDir;

use crate::session::{LabelError, Session, SessionState};
use crate::{parse_session_config, Service};

type Shared = State<Arc<Service>>;

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(service: Arc<Service>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/api/health", get(health))
        .route("/api/classes", get(classes))
        .route("/api/sessions", post(create).get(list))
        .route("/api/sessions/{id}", get(snapshot))
        .route("/api/sessions/{id}/queries", get(queries))
        .route("/api/sessions/{id}/labels", post(labels))
        .route("/api/sessions/{id}/metrics.csv", get(metrics_csv))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

fn find(service: &Service, id: &str) -> ApiResult<Arc<Session>> {
    service
        .session(id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))
}

fn conflict(state: SessionState) -> ApiError {
    let state = serde_json::to_value(state).expect("enum serializes");
    ApiError(StatusCode::CONFLICT, format!("session is {}, not awaiting labels", state.as_str().unwrap_or("?")))
}

async fn health() -> &'static str {
    "ok"
}

async fn classes(State(service): Shared) -> Json<Vec<String>> {
    Json(service.class_names().to_vec())
}

async fn list(State(service): Shared) -> Json<Vec<String>> {
    Json(service.session_ids())
}

async fn create(State(service): Shared, body: Bytes) -> ApiResult<Response> {
    let config = parse_session_config(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let session = tokio::task::spawn_blocking(move || service.create_session(config))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| match e {
            spadal::Error::Io(_) | spadal::Error::Json(_) => ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
            _ => ApiError(StatusCode::BAD_REQUEST, e.to_string()),
        })?;
    let body = json!({ "id": session.id(), "state": session.state() });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn snapshot(State(service): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(find(&service, &id)?.snapshot()).into_response())
}

async fn queries(State(service): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let session = find(&service, &id)?;
    let items = session.queries().map_err(conflict)?;
    let round = session.snapshot().round;
    Ok(Json(json!({
        "round": round,
        "classes": service.class_names(),
        "items": items,
    }))
    .into_response())
}

async fn labels(State(service): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let session = find(&service, &id)?;
    let labels: BTreeMap<GroupId, usize> = serde_json::from_slice(&body)
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("expected {{group_id: class}}: {e}")))?;
    let ack = session.submit_labels(&labels).map_err(|e| match e {
        LabelError::WrongState(s) => conflict(s),
        LabelError::UnknownGroup(g) => ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("{g} is not pending")),
        LabelError::InvalidClass { group, class } => {
            ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("class {class} for {group} is out of range"))
        }
    })?;
    Ok(Json(ack).into_response())
}

async fn metrics_csv(State(service): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let csv = find(&service, &id)?.metrics_csv();
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}
