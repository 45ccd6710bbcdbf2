//! The /v1 JSON API.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::analysis::{execute, prepare, AnalysisRequest, StoredResult};
use crate::session::{CreateSession, Event, Live, PostMove, SessionError};
use crate::store::Store;

const SESSIONS: &str = "sessions";
const RESULTS: &str = "results";

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done { result: Value },
    Failed { error: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct Job {
    pub id: String,
    pub kind: String,
    #[serde(flatten)]
    pub state: JobState,
    pub cached: bool,
}

pub struct AppState {
    pub store: Store,
    sessions: Mutex<HashMap<String, Arc<Mutex<Live>>>>,
    jobs: Mutex<HashMap<String, Job>>,
    workers: Arc<Semaphore>,
}

impl AppState {
    pub fn new(store: Store) -> Arc<AppState> {
        let n = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2);
        Arc::new(AppState {
            store,
            sessions: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
            workers: Arc::new(Semaphore::new(n)),
        })
    }

    /// Session from memory, else replayed from disk.
    fn session(&self, id: &str) -> Result<Arc<Mutex<Live>>, ApiError> {
        if let Some(s) = self.sessions.lock().unwrap().get(id) {
            return Ok(s.clone());
        }
        let stored = self.store.read(SESSIONS, id)?.ok_or_else(|| SessionError::NotFound(id.to_string()))?;
        let live = Arc::new(Mutex::new(Live::restore(stored)?));
        Ok(self.sessions.lock().unwrap().entry(id.to_string()).or_insert(live).clone())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: String) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, code: "malformed", message }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            SessionError::NotYourTurn(_) => (StatusCode::CONFLICT, "not_your_turn"),
            SessionError::Finished(_) => (StatusCode::CONFLICT, "session_finished"),
            SessionError::Malformed(_) => (StatusCode::BAD_REQUEST, "malformed"),
            SessionError::Game(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            SessionError::Corrupt(_) | SessionError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError { status, code, message: e.to_string() }
    }
}

impl From<seurat_core::Error> for ApiError {
    fn from(e: seurat_core::Error) -> Self {
        SessionError::Game(e).into()
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        SessionError::Io(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": { "code": self.code, "message": self.message } }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        message: format!("worker failed: {e}"),
    })?
}

fn view(live: &Live, events: &[Event]) -> Value {
    let s = &live.session;
    let mut v = serde_json::to_value(s).expect("session serializes");
    let m = v.as_object_mut().expect("object");
    m.insert("to_move".into(), json!(s.to_move()));
    m.insert("events".into(), json!(events));
    v
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/moves", post(post_move))
        .route("/v1/sessions/{id}/hint", get(get_hint))
        .route("/v1/analyses", post(post_analysis))
        .route("/v1/analyses/{id}", get(get_analysis))
        .with_state(state)
}

async fn create_session(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: CreateSession = parse(&body)?;
    let uuid = uuid::Uuid::new_v4();
    let id = uuid.simple().to_string();
    let seed = uuid.as_u64_pair().0;
    let st2 = st.clone();
    let value = blocking(move || {
        let (live, events) = Live::create(id.clone(), req, seed)?;
        st2.store.write(SESSIONS, &id, &live.session)?;
        let v = view(&live, &events);
        st2.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(live)));
        Ok(v)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(value)).into_response())
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let value = blocking(move || {
        let s = st.session(&id)?;
        let live = s.lock().unwrap();
        Ok(view(&live, &[]))
    })
    .await?;
    Ok(Json(value).into_response())
}

async fn post_move(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: PostMove = parse(&body)?;
    let value = blocking(move || {
        let s = st.session(&id)?;
        let mut live = s.lock().unwrap();
        let before = live.session.clone();
        let events = match live.post(req) {
            Ok(e) => e,
            Err(e) => {
                live.session = before;
                return Err(e.into());
            }
        };
        if let Err(e) = st.store.write(SESSIONS, &id, &live.session) {
            live.session = before;
            return Err(e.into());
        }
        Ok(view(&live, &events))
    })
    .await?;
    Ok(Json(value).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HintQuery {
    depth: Option<u32>,
}

async fn get_hint(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<HintQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let value = blocking(move || {
        let s = st.session(&id)?;
        let live = s.lock().unwrap();
        Ok(serde_json::to_value(live.hint(q.depth)?).expect("hint serializes"))
    })
    .await?;
    Ok(Json(value).into_response())
}

async fn post_analysis(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: AnalysisRequest = parse(&body)?;
    let prepared = blocking(move || Ok(prepare(req, false)?)).await?;
    let id = prepared.key.clone();
    let kind = prepared.request.kind().to_string();
    if let Some(stored) = st.store.read::<StoredResult>(RESULTS, &id)? {
        let job = Job { id, kind, state: JobState::Done { result: stored.result }, cached: true };
        return Ok(Json(job).into_response());
    }
    {
        let mut jobs = st.jobs.lock().unwrap();
        if let Some(j) = jobs.get(&id) {
            if !matches!(j.state, JobState::Failed { .. }) {
                return Ok((StatusCode::ACCEPTED, Json(j.clone())).into_response());
            }
        }
        jobs.insert(id.clone(), Job { id: id.clone(), kind: kind.clone(), state: JobState::Queued, cached: false });
    }
    let st2 = st.clone();
    tokio::spawn(async move {
        let _permit = st2.workers.clone().acquire_owned().await.expect("semaphore open");
        set_state(&st2, &prepared.key, JobState::Running);
        let key = prepared.key.clone();
        let outcome = tokio::task::spawn_blocking(move || execute(&prepared)).await;
        let state = match outcome {
            Ok(Ok(result)) => {
                let stored = StoredResult { id: key.clone(), kind: kind.clone(), result };
                match st2.store.write(RESULTS, &key, &stored) {
                    Ok(()) => JobState::Done { result: stored.result },
                    Err(e) => JobState::Failed { error: format!("storage error: {e}") },
                }
            }
            Ok(Err(e)) => JobState::Failed { error: e.to_string() },
            Err(e) => JobState::Failed { error: format!("worker crashed: {e}") },
        };
        set_state(&st2, &key, state);
    });
    let job = st.jobs.lock().unwrap().get(&id).cloned().expect("job inserted");
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

fn set_state(st: &AppState, id: &str, state: JobState) {
    if let Some(j) = st.jobs.lock().unwrap().get_mut(id) {
        j.state = state;
    }
}

async fn get_analysis(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    if let Some(j) = st.jobs.lock().unwrap().get(&id) {
        return Ok(Json(j.clone()).into_response());
    }
    match st.store.read::<StoredResult>(RESULTS, &id)? {
        Some(s) => Ok(Json(Job { id, kind: s.kind, state: JobState::Done { result: s.result }, cached: true }).into_response()),
        None => Err(ApiError { status: StatusCode::NOT_FOUND, code: "not_found", message: format!("analysis {id} not found") }),
    }
}

pub async fn serve(store: Store, port: u16) -> std::io::Result<()> {
    let app = router(AppState::new(store));
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await
}
