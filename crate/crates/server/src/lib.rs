//! HTTP adapter over the audit workflow. Every handler calls the same
//! pipeline functions as the CLI; this crate only handles transport,
//! persistence and locking.

mod store;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use nishpaksh_core::metrics::{
    BootstrapConfig, Metric, MetricCache, DEFAULT_LEVEL, DEFAULT_REPLICATES,
};
use nishpaksh_core::pipeline::{
    inference_payload, proxy_payload, scoring_payload, survey_payload, threshold_payload,
};
use nishpaksh_core::proxy::DEFAULT_PROXY_THRESHOLD;
use nishpaksh_core::report::{export_plot_data, generate_report, render, PlotKind, ReportFormat};
use nishpaksh_core::risk::{default_question_bank, parse_question_bank, RiskConfig};
use nishpaksh_core::scoring::ScoringConfig;
use nishpaksh_core::session::{AuditSession, Stage, StagePayload};
use nishpaksh_core::thresholds::{Bounds, ModelProfile, SectorPolicy};
use nishpaksh_core::{
    canonical, load_csv, ColumnSchema, Error, Result, SurveyItem, SurveyResponse, ThresholdTable,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use store::{valid_id, Entry, Store};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8680";
pub const DEFAULT_DATA_DIR: &str = "nishpaksh-data";
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 100 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    pub question_bank: Vec<SurveyItem>,
    pub table: ThresholdTable,
    pub max_upload_bytes: usize,
}

impl ServerConfig {
    /// Defaults plus the variables NISHPAKSH_ADDR, NISHPAKSH_DATA_DIR,
    /// NISHPAKSH_QUESTION_BANK and NISHPAKSH_MAX_UPLOAD_BYTES.
    pub fn from_env() -> Result<Self> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let addr = var("NISHPAKSH_ADDR").unwrap_or_else(|| DEFAULT_ADDR.to_string());
        let addr = addr.parse().map_err(|_| {
            Error::InvalidParameter(format!("NISHPAKSH_ADDR `{addr}` is not host:port"))
        })?;
        let question_bank = match var("NISHPAKSH_QUESTION_BANK") {
            Some(path) => parse_question_bank(&std::fs::read_to_string(path)?)?,
            None => default_question_bank(),
        };
        let max_upload_bytes = match var("NISHPAKSH_MAX_UPLOAD_BYTES") {
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad upload limit `{v}`")))?,
            None => DEFAULT_MAX_UPLOAD_BYTES,
        };
        Ok(Self {
            addr,
            data_dir: var("NISHPAKSH_DATA_DIR")
                .unwrap_or_else(|| DEFAULT_DATA_DIR.into())
                .into(),
            question_bank,
            table: ThresholdTable::default(),
            max_upload_bytes,
        })
    }

    pub fn with_data_dir(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            addr: DEFAULT_ADDR.parse().expect("valid default address"),
            data_dir: data_dir.into(),
            question_bank: default_question_bank(),
            table: ThresholdTable::default(),
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
        }
    }
}

pub struct AppState {
    pub store: Store,
    pub question_bank: Vec<SurveyItem>,
    pub table: ThresholdTable,
    pub cache: MetricCache,
}

impl AppState {
    pub fn new(config: &ServerConfig) -> Result<Self> {
        Ok(Self {
            store: Store::open(&config.data_dir)?,
            question_bank: config.question_bank.clone(),
            table: config.table.clone(),
            cache: MetricCache::new(),
        })
    }
}

type Shared = Arc<AppState>;

/// Error response: status from the error class, body is an `ApiError`.
pub struct ApiFailure(pub Error);

impl From<Error> for ApiFailure {
    fn from(e: Error) -> Self {
        ApiFailure(e)
    }
}

impl IntoResponse for ApiFailure {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.class().http_status())
            .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json_response(status, &self.0.to_api_error())
    }
}

type Handler = std::result::Result<Response, ApiFailure>;

fn json_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match canonical::to_bytes(body) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn ok<T: Serialize>(body: &T) -> Handler {
    Ok(json_response(StatusCode::OK, body))
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T> {
    Ok(serde_json::from_slice(body)?)
}

/// Reject a request for `stage` unless it is the current stage or an
/// already completed one (which is then amended).
fn ensure_reachable(session: &AuditSession, stage: Stage) -> Result<()> {
    if session.stage == stage || session.payloads.has(stage) {
        Ok(())
    } else {
        Err(Error::StageOrderViolation {
            current: session.stage.to_string(),
            requested: stage.to_string(),
        })
    }
}

fn apply(session: &mut AuditSession, payload: StagePayload) -> Result<()> {
    if session.payloads.has(payload.stage()) {
        session.amend_stage(payload)
    } else {
        session.complete_stage(payload)
    }
}

fn blocking_error(e: tokio::task::JoinError) -> Error {
    Error::Io(format!("worker task failed: {e}"))
}

async fn create_session(State(state): State<Shared>) -> Handler {
    let entry = state.store.insert(AuditSession::create())?;
    let guard = entry.read().await;
    Ok(json_response(StatusCode::CREATED, &guard.session))
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> Handler {
    let entry = state.store.get(&id)?;
    let guard = entry.read().await;
    ok(&guard.session)
}

async fn question_bank(State(state): State<Shared>) -> Handler {
    ok(&state.question_bank)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SurveyBody {
    List(Vec<SurveyResponse>),
    Full {
        responses: Vec<SurveyResponse>,
        #[serde(default)]
        risk_config: RiskConfig,
    },
}

async fn put_survey(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Handler {
    let entry = state.store.get(&id)?;
    let mut guard = entry.write().await;
    ensure_reachable(&guard.session, Stage::SurveyIntake)?;
    let (responses, risk_config) = match parse::<SurveyBody>(&body)? {
        SurveyBody::List(r) => (r, RiskConfig::default()),
        SurveyBody::Full {
            responses,
            risk_config,
        } => (responses, risk_config),
    };
    let payload = survey_payload(&state.question_bank, &responses, &risk_config)?;
    let profile = payload.profile.clone();
    apply(&mut guard.session, StagePayload::Survey(payload))?;
    state.store.persist(&guard.session)?;
    ok(&profile)
}

#[derive(Deserialize)]
struct ConfigBody {
    model: ModelProfile,
    #[serde(default = "SectorPolicy::generic")]
    policy: SectorPolicy,
    #[serde(default)]
    user_overrides: BTreeMap<Metric, Bounds>,
}

async fn put_config(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Handler {
    let entry = state.store.get(&id)?;
    let mut guard = entry.write().await;
    ensure_reachable(&guard.session, Stage::ThresholdSpecification)?;
    let body: ConfigBody = parse(&body)?;
    let profile = guard
        .session
        .payloads
        .survey
        .as_ref()
        .map(|s| s.profile.clone())
        .ok_or_else(|| Error::StageNotCompleted(Stage::SurveyIntake.to_string()))?;
    let payload = threshold_payload(
        &profile,
        &body.model,
        &body.policy,
        &body.user_overrides,
        &state.table,
    )?;
    let spec = payload.thresholds.clone();
    apply(&mut guard.session, StagePayload::Thresholds(payload))?;
    state.store.persist(&guard.session)?;
    ok(&spec)
}

async fn post_dataset(
    State(state): State<Shared>,
    Path(id): Path<String>,
    mut multipart: Multipart,
) -> Handler {
    let entry = state.store.get(&id)?;
    {
        let guard = entry.read().await;
        ensure_reachable(&guard.session, Stage::ProxyFeatureReview)?;
    }
    let bad = |e: axum::extract::multipart::MultipartError| {
        Error::InvalidParameter(format!("multipart body: {}", e.body_text()))
    };
    let mut csv: Option<Bytes> = None;
    let mut schema: Option<ColumnSchema> = None;
    let mut threshold = DEFAULT_PROXY_THRESHOLD;
    while let Some(field) = multipart.next_field().await.map_err(bad)? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(bad)?;
        match name.as_str() {
            "file" | "data" => csv = Some(bytes),
            "schema" => schema = Some(parse(&bytes)?),
            "proxy_threshold" => {
                threshold = std::str::from_utf8(&bytes)
                    .ok()
                    .and_then(|s| s.trim().parse().ok())
                    .filter(|t: &f64| (0.0..=1.0).contains(t))
                    .ok_or_else(|| {
                        Error::InvalidParameter("proxy_threshold must be in [0,1]".into())
                    })?;
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unexpected multipart field `{other}`"
                ))
                .into())
            }
        }
    }
    let csv = csv.ok_or_else(|| Error::InvalidParameter("missing `file` part".into()))?;
    let schema = schema.ok_or_else(|| Error::InvalidParameter("missing `schema` part".into()))?;
    let (dataset, payload) = tokio::task::spawn_blocking(move || -> Result<_> {
        let dataset = load_csv(csv.as_ref(), &schema)?;
        let payload = proxy_payload(&dataset, threshold)?;
        Ok((dataset, payload))
    })
    .await
    .map_err(blocking_error)??;

    let mut guard = entry.write().await;
    ensure_reachable(&guard.session, Stage::ProxyFeatureReview)?;
    let findings = payload.findings.clone();
    apply(&mut guard.session, StagePayload::Proxy(payload))?;
    guard.dataset = Some(Arc::new(dataset));
    state.store.persist(&guard.session)?;
    ok(&findings)
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_level() -> f64 {
    DEFAULT_LEVEL
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
struct EvaluateBody {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default = "default_replicates")]
    replicates: usize,
    #[serde(default = "default_level")]
    level: f64,
    /// Set to false to skip bootstrap intervals.
    #[serde(default = "yes")]
    intervals: bool,
}

async fn post_evaluate(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Handler {
    let entry = state.store.get(&id)?;
    let mut guard = entry.write().await;
    ensure_reachable(&guard.session, Stage::Inference)?;
    let body: EvaluateBody = parse(&body)?;
    let bootstrap = if body.intervals {
        let seed = body.seed.ok_or_else(|| {
            Error::InvalidParameter("`seed` is required when intervals are enabled".into())
        })?;
        Some(BootstrapConfig {
            replicates: body.replicates,
            seed,
            level: body.level,
        })
    } else {
        None
    };
    let reviewed = guard
        .session
        .payloads
        .proxy
        .as_ref()
        .map(|p| p.dataset_fingerprint.clone())
        .unwrap_or_default();
    let dataset = guard
        .dataset
        .clone()
        .filter(|d| d.fingerprint() == reviewed)
        .ok_or_else(|| {
            Error::DatasetRequired("upload the reviewed dataset again before evaluating".into())
        })?;
    let st = state.clone();
    let payload =
        tokio::task::spawn_blocking(move || inference_payload(&dataset, bootstrap, &st.cache))
            .await
            .map_err(blocking_error)??;
    let results = payload.results.clone();
    apply(&mut guard.session, StagePayload::Inference(payload))?;
    state.store.persist(&guard.session)?;
    ok(&results)
}

async fn post_score(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Handler {
    let entry = state.store.get(&id)?;
    let mut guard = entry.write().await;
    ensure_reachable(&guard.session, Stage::CompositeScoring)?;
    let config: ScoringConfig = if body.iter().all(u8::is_ascii_whitespace) {
        ScoringConfig::default()
    } else {
        parse(&body)?
    };
    let p = &guard.session.payloads;
    let (Some(thresholds), Some(inference)) = (p.thresholds.as_ref(), p.inference.as_ref()) else {
        return Err(Error::StageNotCompleted(Stage::Inference.to_string()).into());
    };
    let payload = scoring_payload(&thresholds.thresholds, inference, &config)?;
    let verdict = payload.verdict.clone();
    apply(&mut guard.session, StagePayload::Scoring(payload))?;
    state.store.persist(&guard.session)?;
    ok(&verdict)
}

#[derive(Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn get_report(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> Handler {
    let format: ReportFormat = q.format.as_deref().unwrap_or("json").parse()?;
    let entry = state.store.get(&id)?;
    let guard = entry.read().await;
    let report = generate_report(&guard.session)?;
    let bytes = render(&report, format)?;
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, format.content_type())],
        bytes,
    )
        .into_response())
}

async fn get_plot(
    State(state): State<Shared>,
    Path((id, kind)): Path<(String, String)>,
) -> Handler {
    let kind: PlotKind = kind.parse()?;
    let entry = state.store.get(&id)?;
    let guard = entry.read().await;
    ok(&export_plot_data(&guard.session, kind)?)
}

async fn get_checkpoint(State(state): State<Shared>, Path(id): Path<String>) -> Handler {
    let entry = state.store.get(&id)?;
    let guard = entry.read().await;
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "application/json")],
        guard.session.checkpoint(),
    )
        .into_response())
}

async fn put_checkpoint(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Handler {
    let text = std::str::from_utf8(&body)
        .map_err(|_| Error::CorruptCheckpoint("checkpoint is not UTF-8".into()))?;
    let session = AuditSession::restore(text)?;
    if session.session_id != id {
        return Err(Error::InvalidParameter(format!(
            "checkpoint belongs to session `{}`, not `{id}`",
            session.session_id
        ))
        .into());
    }
    let entry = match state.store.get(&id) {
        Ok(entry) => entry,
        Err(Error::SessionNotFound(_)) => state.store.insert(session.clone())?,
        Err(e) => return Err(e.into()),
    };
    let mut guard = entry.write().await;
    let reviewed = session
        .payloads
        .proxy
        .as_ref()
        .map(|p| p.dataset_fingerprint.clone());
    if guard.dataset.as_ref().map(|d| d.fingerprint()) != reviewed {
        guard.dataset = None;
    }
    guard.session = session;
    state.store.persist(&guard.session)?;
    ok(&guard.session)
}

async fn fallback() -> Handler {
    Err(Error::InvalidParameter("no such route".into()).into())
}

pub fn router(state: Arc<AppState>, max_upload_bytes: usize) -> Router {
    Router::new()
        .route("/api/v1/sessions", post(create_session))
        .route("/api/v1/sessions/{id}", get(get_session))
        .route("/api/v1/question-bank", get(question_bank))
        .route("/api/v1/sessions/{id}/survey", put(put_survey))
        .route("/api/v1/sessions/{id}/config", put(put_config))
        .route("/api/v1/sessions/{id}/dataset", post(post_dataset))
        .route("/api/v1/sessions/{id}/evaluate", post(post_evaluate))
        .route("/api/v1/sessions/{id}/score", post(post_score))
        .route("/api/v1/sessions/{id}/report", get(get_report))
        .route("/api/v1/sessions/{id}/plots/{kind}", get(get_plot))
        .route(
            "/api/v1/sessions/{id}/checkpoint",
            get(get_checkpoint).put(put_checkpoint),
        )
        .fallback(fallback)
        .layer(DefaultBodyLimit::max(max_upload_bytes))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(config: ServerConfig) -> Result<()> {
    let state = Arc::new(AppState::new(&config)?);
    let app = router(state, config.max_upload_bytes);
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    eprintln!(
        "nishpaksh listening on http://{} (sessions in {})",
        config.addr,
        config.data_dir.display()
    );
    axum::serve(listener, app).await?;
    Ok(())
}
