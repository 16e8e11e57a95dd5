// SPDX-License-Identifier: Apache-2.0

//! HTTP/JSON front end for the orchestrator.
//!
//! Every response carries `x-state-version`. The value never decreases for
//! the lifetime of the process, including across topology reloads.

use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ifusion_core::model::{Identifier, ServiceIntent};
use ifusion_core::scenario::{run_scenario, ScenarioFile};
use ifusion_core::sdtn::AbstractionLevel;
use ifusion_core::system::FaultSpec;
use ifusion_core::topofile::TopologyFile;
use ifusion_core::{Error, ErrorCode, System};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;

pub const STATE_VERSION_HEADER: &str = "x-state-version";

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

pub fn status_for(code: ErrorCode) -> StatusCode {
    use ErrorCode::*;
    match code {
        BadRequest | ParseError | DecodeError | SeqOutOfRange | NotLegacy | NotNative => StatusCode::BAD_REQUEST,
        InvalidIdentifier | InvalidIntent | InvalidGraph | SchemaViolation | ValidationFailed | BadDescriptor
        | UnmappedPath | UnmappedParam | InvalidRules | InvalidRequest | InvalidConfig | OutOfRangeModulation
        | StepFailed => StatusCode::UNPROCESSABLE_ENTITY,
        UnknownDevice | UnknownInterface | UnknownNode | UnknownLsp | UnknownVpn | UnknownPort | UnknownOch
        | UnknownOdu | UnknownLink | UnknownAllocation | UnknownService | UnknownTarget | NotFound => {
            StatusCode::NOT_FOUND
        }
        IllegalTransition | LockedByOther | NoPath | BadState | TagExhausted | Blocked | OchInUse | LinkDown
        | NoDomainPath | DomainInfeasible | OpticalBlocked | StillNoPath | NoAttachment => StatusCode::CONFLICT,
        Unreachable | InjectedFault | LegacyRejected | CommitFailed | ReserveFailed => StatusCode::BAD_GATEWAY,
        CompensationFailed | RollbackIncomplete | TeardownIncomplete => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

pub struct ApiError {
    body: ErrorBody,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Error::BadRequest(message.into()).into()
    }

    fn not_found(message: impl Into<String>) -> Self {
        Error::NotFound(message.into()).into()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            body: ErrorBody {
                code: e.code(),
                message: e.to_string(),
                detail: None,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_for(self.body.code), Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Shared handle. A topology reload swaps the system and folds the old
/// version into a base offset so the header stays monotone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    system: RwLock<Arc<System>>,
    base: AtomicU64,
    audit_each_mutation: bool,
}

impl AppState {
    pub fn new(system: Arc<System>) -> Self {
        Self::with_audit(system, false)
    }

    /// With `audit` on, every mutation is followed by a full ledger audit.
    pub fn with_audit(system: Arc<System>, audit: bool) -> Self {
        system.set_audit_each_mutation(audit);
        AppState {
            inner: Arc::new(Inner {
                system: RwLock::new(system),
                base: AtomicU64::new(0),
                audit_each_mutation: audit,
            }),
        }
    }

    pub fn system(&self) -> Arc<System> {
        self.inner.system.read().expect("system lock").clone()
    }

    pub fn version(&self) -> u64 {
        self.inner.base.load(Ordering::SeqCst) + self.system().state_version()
    }

    fn stamp(&self, v: u64) -> u64 {
        self.inner.base.load(Ordering::SeqCst) + v
    }

    pub fn replace(&self, next: Arc<System>) {
        next.set_audit_each_mutation(self.inner.audit_each_mutation);
        let mut slot = self.inner.system.write().expect("system lock");
        self.inner.base.fetch_add(slot.state_version() + 1, Ordering::SeqCst);
        *slot = next;
    }
}

/// A JSON body plus the version it was read at.
struct Versioned<T>(u64, StatusCode, T);

impl<T: Serialize> IntoResponse for Versioned<T> {
    fn into_response(self) -> Response {
        let mut r = (self.1, Json(self.2)).into_response();
        r.headers_mut().insert(STATE_VERSION_HEADER, HeaderValue::from(self.0));
        r
    }
}

fn ok<T>(v: u64, body: T) -> Versioned<T> {
    Versioned(v, StatusCode::OK, body)
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> R {
    tokio::task::spawn_blocking(f).await.expect("blocking task panicked")
}

async fn stamp_version(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let mut resp = next.run(req).await;
    if !resp.headers().contains_key(STATE_VERSION_HEADER) {
        resp.headers_mut().insert(STATE_VERSION_HEADER, HeaderValue::from(state.version()));
    }
    resp
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sdtn/topology", get(topology))
        .route("/sdtn/services", get(list_services).post(create_service))
        .route("/sdtn/services/{id}", get(get_service).delete(delete_service))
        .route("/sdtn/services/{id}/log", get(service_log))
        .route("/sdtn/services/{id}/path", get(service_path))
        .route("/sdtn/inter-domain-links", get(inter_domain_links))
        .route("/sdtn/augmented-links", get(augmented_links))
        .route("/sdtn/blocked", get(blocked))
        .route("/sdtn/reroutes", get(reroutes))
        .route("/domains/ip/topology", get(ip_topology))
        .route("/domains/ip/inventory", get(ip_inventory))
        .route("/domains/ip/lsps", get(ip_lsps))
        .route("/domains/ip/vpns", get(ip_vpns))
        .route("/domains/ip/monitoring", get(ip_monitoring))
        .route("/domains/optical/topology", get(optical_topology))
        .route("/domains/optical/tapi/context", get(optical_tapi))
        .route("/domains/optical/ochs", get(optical_ochs))
        .route("/domains/optical/odus", get(optical_odus))
        .route("/domains/optical/monitoring", get(optical_monitoring))
        .route("/domains/mw/topology", get(mw_topology))
        .route("/domains/mw/links", get(mw_links))
        .route("/domains/mw/allocations", get(mw_allocations))
        .route("/metrics", get(metrics))
        .route("/audit", get(audit))
        .route("/ledgers", get(ledgers))
        .route("/admin/topology", post(load_topology))
        .route("/admin/faults", post(inject_fault))
        .route("/admin/tick", post(tick))
        .route("/admin/scenario", post(scenario))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(middleware::from_fn_with_state(state.clone(), stamp_version))
        .with_state(state)
}

/// Serves until the listener fails. Bind to port 0 in tests.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr()?, "serving");
    axum::serve(listener, router(state)).await
}

fn service_id(raw: &str) -> ApiResult<Identifier> {
    let text = if raw.contains('/') { raw.to_string() } else { format!("sdtn/{raw}") };
    Identifier::from_str(&text).map_err(|e| Error::from(e).into())
}

async fn health(State(s): State<AppState>) -> impl IntoResponse {
    let sys = s.system();
    ok(s.version(), sys.summary())
}

#[derive(Deserialize)]
struct TopologyQuery {
    level: Option<String>,
    domain: Option<String>,
}

async fn topology(State(s): State<AppState>, Query(q): Query<TopologyQuery>) -> ApiResult<impl IntoResponse> {
    let level = match q.level.as_deref() {
        None => AbstractionLevel::Full,
        Some(l) => AbstractionLevel::from_str(l).map_err(ApiError::bad_request)?,
    };
    let sys = s.system();
    if let Some(d) = &q.domain {
        if !sys.sdtn().domains().contains_key(d) {
            return Err(ApiError::not_found(format!("unknown domain {d:?}")));
        }
    }
    let (v, t) = sys.topology(level, q.domain.as_deref());
    Ok(ok(s.stamp(v), t))
}

async fn list_services(State(s): State<AppState>) -> impl IntoResponse {
    let (v, list) = s.system().services();
    ok(s.stamp(v), list)
}

async fn create_service(State(s): State<AppState>, body: axum::body::Bytes) -> ApiResult<impl IntoResponse> {
    let intent: ServiceIntent = serde_json::from_slice(&body).map_err(|e| ApiError {
        body: ErrorBody {
            code: ErrorCode::InvalidIntent,
            message: e.to_string(),
            detail: None,
        },
    })?;
    let sys = s.system();
    let svc = blocking(move || sys.provision(&intent)).await?;
    Ok(Versioned(s.version(), StatusCode::CREATED, svc))
}

async fn get_service(State(s): State<AppState>, Path(raw): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = service_id(&raw)?;
    let (v, r) = s.system().service(&id);
    Ok(ok(s.stamp(v), r?))
}

async fn delete_service(State(s): State<AppState>, Path(raw): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = service_id(&raw)?;
    let sys = s.system();
    let svc = blocking(move || sys.teardown(&id)).await?;
    Ok(ok(s.version(), svc))
}

async fn service_log(State(s): State<AppState>, Path(raw): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = service_id(&raw)?;
    let (v, r) = s.system().service(&id);
    Ok(ok(s.stamp(v), r?.transaction_log))
}

async fn service_path(State(s): State<AppState>, Path(raw): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = service_id(&raw)?;
    let (v, r) = s.system().read(|sys| sys.sdtn().service_path(&id));
    Ok(ok(s.stamp(v), r.map_err(Error::from)?))
}

macro_rules! read_handler {
    ($name:ident, |$sys:ident| $body:expr) => {
        async fn $name(State(s): State<AppState>) -> impl IntoResponse {
            let (v, out) = s.system().read(|$sys| $body);
            ok(s.stamp(v), out)
        }
    };
}

read_handler!(inter_domain_links, |sys| sys.sdtn().inter_domain_links());
read_handler!(augmented_links, |sys| sys.sdtn().augmented_links());
read_handler!(blocked, |sys| sys.sdtn().blocked_requests());
read_handler!(reroutes, |sys| sys.reroute_reports());
read_handler!(ip_topology, |sys| sys.ip().topology());
read_handler!(ip_inventory, |sys| sys.ip().inventory());
read_handler!(ip_lsps, |sys| sys.ip().lsps());
read_handler!(ip_vpns, |sys| sys.ip().vpns());
read_handler!(ip_monitoring, |sys| sys.ip().monitoring());
read_handler!(optical_topology, |sys| sys.optical().topology());
read_handler!(optical_tapi, |sys| sys.optical().tapi_view());
read_handler!(optical_ochs, |sys| sys.optical().ochs());
read_handler!(optical_odus, |sys| sys.optical().odus());
read_handler!(optical_monitoring, |sys| sys.optical().monitoring());
read_handler!(mw_topology, |sys| sys.mw().topology());
read_handler!(mw_links, |sys| sys.mw().links());
read_handler!(mw_allocations, |sys| sys.mw().allocations());
read_handler!(metrics, |sys| sys.metrics());
read_handler!(audit, |sys| sys.audit());
read_handler!(ledgers, |sys| sys.ledgers());

async fn load_topology(State(s): State<AppState>, Json(file): Json<TopologyFile>) -> ApiResult<impl IntoResponse> {
    let next = blocking(move || System::load(file)).await.map_err(Error::from)?;
    let summary = next.summary();
    tracing::info!(devices = summary.devices, "topology reloaded");
    s.replace(next);
    Ok(ok(s.version(), summary))
}

async fn inject_fault(State(s): State<AppState>, Json(fault): Json<FaultSpec>) -> ApiResult<impl IntoResponse> {
    let sys = s.system();
    let echo = fault.clone();
    tracing::info!(kind = ?fault.kind, target = %fault.target, "fault injected");
    blocking(move || sys.inject(&fault)).await?;
    Ok(ok(s.version(), echo))
}

#[derive(Deserialize)]
struct TickBody {
    ticks: u64,
}

async fn tick(State(s): State<AppState>, Json(body): Json<TickBody>) -> impl IntoResponse {
    let sys = s.system();
    let clock = blocking(move || {
        sys.tick(body.ticks);
        sys.clock()
    })
    .await;
    ok(s.version(), json!({ "clock": clock }))
}

async fn scenario(State(s): State<AppState>, body: axum::body::Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let file = ScenarioFile::parse(text).map_err(Error::from)?;
    let sys = s.system();
    let report = blocking(move || run_scenario(&sys, &file)).await.map_err(Error::from)?;
    let v = s.version();
    if let Some(err) = report.error() {
        let body = ErrorBody {
            code: ErrorCode::StepFailed,
            message: err.to_string(),
            detail: Some(serde_json::to_value(&report).expect("report serializes")),
        };
        return Ok(Versioned(v, StatusCode::UNPROCESSABLE_ENTITY, body).into_response());
    }
    Ok(ok(v, report).into_response())
}
