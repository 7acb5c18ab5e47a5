//! HTTP routes. Handlers only compose core operations; verification runs on
//! blocking threads so reads stay responsive while attempts are checked.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use verigrade_core::attempt::{run_attempt, submission_hash, AttemptVerdict};
use verigrade_core::backend::Backend;
use verigrade_core::bank::{load_bank, Bank, Exercise};
use verigrade_core::progress::{lecture_picks, question_stats, PickBand, ProgressStore};

use crate::config::{Role, ServiceConfig, User};

/// Shared state behind every handler.
pub struct AppState {
    pub config: ServiceConfig,
    pub bank: Bank,
    pub store: ProgressStore,
    pub backend: Arc<dyn Backend>,
    workers: Semaphore,
    in_flight: Mutex<HashSet<String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error("exercise bank is invalid:\n{0}")]
    Bank(String),
    #[error("progress log: {0}")]
    Log(#[from] verigrade_core::progress::ProgressError),
    #[error("cannot listen: {0}")]
    Listen(#[from] std::io::Error),
}

impl AppState {
    /// Load the bank and replay the log.
    pub fn open(config: ServiceConfig) -> Result<Self, StartError> {
        let bank = load_bank(&config.bank_dir).map_err(|errors| {
            StartError::Bank(errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))
        })?;
        let backend: Arc<dyn Backend> = Arc::from(config.backend.build());
        Self::with_parts(config, bank, backend)
    }

    pub fn with_parts(config: ServiceConfig, bank: Bank, backend: Arc<dyn Backend>) -> Result<Self, StartError> {
        let store = ProgressStore::open(&config.log_path, config.students(), bank.ids())?;
        Ok(AppState {
            workers: Semaphore::new(config.workers),
            in_flight: Mutex::new(HashSet::new()),
            config,
            bank,
            store,
            backend,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuestionSummary {
    pub id: String,
    pub title: String,
    pub week: u8,
    pub completed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuestionDetail {
    pub id: String,
    pub title: String,
    pub week: u8,
    pub template_text: String,
    pub char_limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AttemptRequest {
    /// Optional; when present it must name the caller.
    #[serde(default)]
    pub student_id: Option<String>,
    /// Optional; when present it must match the path.
    #[serde(default)]
    pub exercise_id: Option<String>,
    pub answer: String,
}

pub type AttemptResponse = AttemptVerdict;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OverviewRow {
    pub id: String,
    pub title: String,
    pub week: u8,
    pub completed_count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Overview {
    pub cohort_size: usize,
    pub current_week: u8,
    pub questions: Vec<OverviewRow>,
    pub lecture_picks: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

/// An error response with a short, asset-free message.
#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError(status, message.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    // Room for the JSON framing around a maximal answer; the answer itself is checked exactly.
    let body_limit = state.config.max_answer_bytes.saturating_mul(2).saturating_add(4096);
    Router::new()
        .route("/questions", get(list_questions))
        .route("/questions/{id}", get(get_question))
        .route("/questions/{id}/attempts", axum::routing::post(post_attempt))
        .route("/overview", get(overview))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not found") })
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

fn caller<'a>(state: &'a AppState, headers: &HeaderMap) -> ApiResult<&'a User> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .and_then(|token| state.config.users.get(token.trim()))
        .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "authentication required"))
}

fn released<'a>(state: &'a AppState, id: &str) -> ApiResult<&'a Exercise> {
    let ex = state.bank.get(id).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no such question"))?;
    if ex.week > state.config.current_week {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "question not released yet"));
    }
    Ok(ex)
}

async fn list_questions(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult<Json<Vec<QuestionSummary>>> {
    let user = caller(&state, &headers)?;
    let progress = state.store.state();
    let mut list: Vec<QuestionSummary> = state
        .bank
        .iter()
        .filter(|ex| ex.week <= state.config.current_week)
        .map(|ex| QuestionSummary {
            id: ex.id.clone(),
            title: ex.title.clone(),
            week: ex.week,
            completed: progress.completed(&user.id, &ex.id),
        })
        .collect();
    list.sort_by(|a, b| (a.week, &a.id).cmp(&(b.week, &b.id)));
    Ok(Json(list))
}

async fn get_question(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Json<QuestionDetail>> {
    caller(&state, &headers)?;
    let ex = released(&state, &id)?;
    Ok(Json(QuestionDetail {
        id: ex.id.clone(),
        title: ex.title.clone(),
        week: ex.week,
        template_text: ex.template.text().to_owned(),
        char_limit: ex.char_limit.map(|l| l.get()),
    }))
}

/// Removes the student from the in-flight set when the attempt finishes, however it ends.
struct InFlight {
    state: Arc<AppState>,
    student: String,
}

impl Drop for InFlight {
    fn drop(&mut self) {
        self.state.in_flight.lock().unwrap_or_else(|e| e.into_inner()).remove(&self.student);
    }
}

async fn post_attempt(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Result<Json<AttemptRequest>, JsonRejection>,
) -> ApiResult<Json<AttemptResponse>> {
    let user = caller(&state, &headers)?.clone();
    released(&state, &id)?;
    let Json(request) = body.map_err(|rejection| match rejection.status() {
        StatusCode::PAYLOAD_TOO_LARGE => ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "answer too large"),
        status => ApiError::new(status, "request body must be JSON with an `answer` field"),
    })?;
    if request.answer.len() > state.config.max_answer_bytes {
        return Err(ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "answer too large"));
    }
    if user.role != Role::Student || request.student_id.as_ref().is_some_and(|s| *s != user.id) {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "attempts must be made by the signed-in student"));
    }
    if request.exercise_id.as_ref().is_some_and(|e| *e != id) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "exercise_id does not match the path"));
    }
    if !state.in_flight.lock().unwrap_or_else(|e| e.into_inner()).insert(user.id.clone()) {
        return Err(ApiError::new(StatusCode::TOO_MANY_REQUESTS, "an attempt is already being checked"));
    }
    let guard = InFlight { state: state.clone(), student: user.id.clone() };

    let work = {
        let state = state.clone();
        async move {
            let _permit = state.workers.acquire().await.map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "shutting down"))?;
            let task_state = state.clone();
            let id = id.clone();
            // The guard travels with the blocking task: if the request gives up,
            // the student stays throttled until the verifier really finishes.
            tokio::task::spawn_blocking(move || {
                let _guard = guard;
                let ex = task_state.bank.get(&id).expect("exercise checked above");
                let verdict = run_attempt(ex, &request.answer, task_state.backend.as_ref());
                let hash = submission_hash(&request.answer);
                task_state
                    .store
                    .record(&user.id, &id, verdict.completed, verdict.verified_count, verdict.error_count, &hash)
                    .map(|_| verdict)
            })
            .await
            .map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "attempt failed"))?
            .map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "attempt could not be recorded"))
        }
    };
    match tokio::time::timeout(state.config.request_deadline(), work).await {
        Ok(result) => result.map(Json),
        Err(_) => Err(ApiError::new(StatusCode::GATEWAY_TIMEOUT, "verification timed out")),
    }
}

async fn overview(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult<Json<Overview>> {
    let user = caller(&state, &headers)?;
    if user.role != Role::Instructor {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "instructors only"));
    }
    Ok(Json(build_overview(&state.bank, &state.store, &state.config.band, state.config.current_week)))
}

/// The instructor grid: per-question completion, no student identities.
pub fn build_overview(bank: &Bank, store: &ProgressStore, band: &PickBand, current_week: u8) -> Overview {
    let progress = store.state();
    let mut stats = Vec::new();
    let mut questions = Vec::new();
    for ex in bank.iter() {
        let s = question_stats(&progress, &ex.id).expect("bank exercises are tracked");
        questions.push(OverviewRow {
            id: ex.id.clone(),
            title: ex.title.clone(),
            week: ex.week,
            completed_count: s.completed_count,
            fraction: s.completion_fraction,
        });
        stats.push(s);
    }
    questions.sort_by(|a, b| (a.week, &a.id).cmp(&(b.week, &b.id)));
    Overview {
        cohort_size: progress.students().len(),
        current_week,
        questions,
        lecture_picks: lecture_picks(&stats, band),
    }
}

/// Bind and serve until ctrl-c. `on_bound` receives the actual address (useful with port 0).
pub async fn serve(state: Arc<AppState>, on_bound: impl FnOnce(SocketAddr)) -> Result<(), StartError> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", state.config.port)).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
