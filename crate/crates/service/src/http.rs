//! JSON-over-HTTP routes.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use iatpoll_core::pipeline::AnalysisRequest;
use iatpoll_core::{RespondentCode, TrialRecord};

use crate::bundle::Bundle;
use crate::error::ServiceError;
use crate::record::{Lifecycle, Millis, StudyRecord};
use crate::store::Store;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/studies", post(create_study))
        .route("/studies/{id}", get(study_summary))
        .route("/studies/{id}/sessions", post(create_session))
        .route("/studies/{id}/lock", post(lock_study))
        .route("/studies/{id}/analysis", post(run_analysis))
        .route("/studies/{id}/report", get(report))
        .route("/studies/{id}/export", get(export))
        .route("/studies/{id}/import", post(import))
        .route("/sessions/{token}/plan", get(session_plan))
        .route("/sessions/{token}/trials", post(submit_trials))
        .route("/sessions/{token}/questionnaire", post(submit_questionnaire))
        .with_state(store)
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

pub fn status_of(e: &ServiceError) -> StatusCode {
    use ServiceError::*;
    match e {
        StudyNotFound(_) | UnknownToken => StatusCode::NOT_FOUND,
        StudyExists(_) | DuplicateCode(_) | CodeSpaceExhausted | Locked(_) | Conflict(_) => {
            StatusCode::CONFLICT
        }
        InvalidField { .. } | GapNotElapsed { .. } | Questionnaire(_) | Protocol(_)
        | Pipeline(_) | Bundle { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        CorruptLog { .. } | Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let field = match &self.0 {
            ServiceError::InvalidField { field, .. } => Some(field.clone()),
            _ => None,
        };
        let body = ErrorBody {
            error: self.0.kind(),
            message: self.0.to_string(),
            field,
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body; an empty body yields the default.
fn parse_body<T: DeserializeOwned + Default>(bytes: &Bytes) -> Result<T, ServiceError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    parse_required(bytes)
}

fn parse_required<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::invalid("body", e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct StudySummary {
    pub id: String,
    pub name: String,
    pub lifecycle: Lifecycle,
    pub created_at: Millis,
    pub respondents: usize,
    pub complete: usize,
    pub has_report: bool,
}

impl From<&StudyRecord> for StudySummary {
    fn from(r: &StudyRecord) -> Self {
        Self {
            id: r.id.to_string(),
            name: r.name.clone(),
            lifecycle: r.lifecycle,
            created_at: r.created_at,
            respondents: r.respondents.len(),
            complete: r.complete_count(),
            has_report: r.last_analysis.is_some(),
        }
    }
}

async fn create_study(State(store): State<Arc<Store>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let record = store.create_study(parse_body(&body)?)?;
    Ok((StatusCode::CREATED, Json(StudySummary::from(&*record))))
}

async fn study_summary(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> ApiResult<Json<StudySummary>> {
    Ok(Json(StudySummary::from(&*store.snapshot(&id)?)))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NewSession {
    respondent: Option<RespondentCode>,
}

async fn create_session(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let request: NewSession = parse_body(&body)?;
    let ticket = store.create_session(&id, request.respondent)?;
    Ok((StatusCode::CREATED, Json(ticket)))
}

async fn lock_study(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<StudySummary>> {
    Ok(Json(StudySummary::from(&*store.lock_study(&id)?)))
}

async fn session_plan(
    State(store): State<Arc<Store>>,
    Path(token): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(store.session_plan(&token)?))
}

async fn submit_trials(
    State(store): State<Arc<Store>>,
    Path(token): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    // Records are decoded one by one so errors can name the offending index.
    let value: serde_json::Value = parse_required(&body)?;
    let items = match &value {
        serde_json::Value::Array(items) => items.clone(),
        serde_json::Value::Object(map) => match map.get("trials") {
            Some(serde_json::Value::Array(items)) => items.clone(),
            _ => return Err(ServiceError::invalid("trials", "expected an array of trial records").into()),
        },
        _ => return Err(ServiceError::invalid("body", "expected trial records").into()),
    };
    let batch = items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value::<TrialRecord>(v)
                .map_err(|e| ServiceError::invalid(format!("trials[{i}]"), e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Json(store.submit_trials(&token, batch)?))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Answers {
    Wrapped { answers: BTreeMap<String, String> },
    Bare(BTreeMap<String, String>),
}

async fn submit_questionnaire(
    State(store): State<Arc<Store>>,
    Path(token): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let raw = match parse_required::<Answers>(&body)? {
        Answers::Wrapped { answers } | Answers::Bare(answers) => answers,
    };
    Ok(Json(store.submit_questionnaire(&token, &raw)?))
}

async fn run_analysis(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let request: Option<AnalysisRequest> = if body.iter().all(u8::is_ascii_whitespace) {
        None
    } else {
        Some(parse_required(&body)?)
    };
    let stored = tokio::task::spawn_blocking(move || store.run_analysis(&id, request))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e.to_string())))??;
    Ok(Json(stored))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct ReportQuery {
    format: Option<String>,
}

async fn report(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<Response> {
    let Some(stored) = store.report(&id)? else {
        return Ok((
            StatusCode::NOT_FOUND,
            Json(ErrorBody {
                error: "no_report",
                message: format!("no analysis has been run for study `{id}`"),
                field: None,
            }),
        )
            .into_response());
    };
    let report = &stored.outcome.report;
    Ok(match q.format.as_deref().unwrap_or("json") {
        "csv" => ([(header::CONTENT_TYPE, "text/csv")], report.to_csv()).into_response(),
        "table" | "text" => {
            ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], report.to_table()).into_response()
        }
        "json" => Json(stored).into_response(),
        other => {
            return Err(ServiceError::invalid("format", format!("unknown format `{other}`")).into())
        }
    })
}

async fn export(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<Bundle>> {
    Ok(Json(store.export(&id)?))
}

async fn import(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let bundle: Bundle = parse_required(&body)?;
    let record = store.import(Some(&id), &bundle)?;
    Ok((StatusCode::CREATED, Json(StudySummary::from(&*record))))
}

/// Serves the API on `listener` until the future is dropped or fails.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<Store>) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}
