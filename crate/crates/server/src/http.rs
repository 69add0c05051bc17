use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::value::RawValue;
use tokio::sync::{RwLock, Semaphore};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::error::{FieldError, ServiceError};
use crate::service::{
    GenerateRequest, KlRequest, Outcome, PerplexityRequest, PkRequest, Service, ShiftRequest, SteerRequest,
    VectorSpecInput,
};

#[derive(Clone)]
pub struct AppState {
    service: Arc<Service>,
    generation_slots: Arc<Semaphore>,
    /// Generations hold it shared; evaluations exclusively.
    eval_lock: Arc<RwLock<()>>,
}

impl AppState {
    pub fn new(service: Service) -> Self {
        let slots = service.config.max_concurrent;
        Self {
            service: Arc::new(service),
            generation_slots: Arc::new(Semaphore::new(slots)),
            eval_lock: Arc::new(RwLock::new(())),
        }
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Instant,
    Generation,
    Evaluation,
}

#[derive(Serialize)]
struct Timing {
    elapsed_ms: f64,
}

#[derive(Serialize)]
struct Envelope<'a> {
    request: &'a RawValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    timing: Timing,
    report: &'a RawValue,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    fields: &'a [FieldError],
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(e: ServiceError) -> Response {
    let (status, body) = match &e {
        ServiceError::Validation { message, fields } => (
            StatusCode::BAD_REQUEST,
            ErrorBody {
                kind: "validation",
                message: message.clone(),
                fields,
                id: None,
            },
        ),
        ServiceError::NotFound(m) => (
            StatusCode::NOT_FOUND,
            ErrorBody {
                kind: "not_found",
                message: m.clone(),
                fields: &[],
                id: None,
            },
        ),
        ServiceError::Busy(m) => (
            StatusCode::CONFLICT,
            ErrorBody {
                kind: "busy",
                message: m.clone(),
                fields: &[],
                id: None,
            },
        ),
        ServiceError::Internal(m) => {
            let id = uuid::Uuid::new_v4().to_string();
            log::error!("internal error {id}: {m}");
            (
                StatusCode::INTERNAL_SERVER_ERROR,
                ErrorBody {
                    kind: "internal",
                    message: "internal error".into(),
                    fields: &[],
                    id: Some(id),
                },
            )
        }
    };
    let body = serde_json::json!({ "error": body }).to_string();
    json_response(status, body)
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "body".to_string() } else { path };
        ServiceError::field(field, e.into_inner().to_string())
    })
}

/// Run `f` on the blocking pool under the concurrency rules for `kind` and
/// wrap its report in the response envelope.
async fn execute<F>(state: AppState, kind: Kind, request: Box<RawValue>, f: F) -> Response
where
    F: FnOnce(&Service) -> Result<Outcome, ServiceError> + Send + 'static,
{
    let _permit = match kind {
        Kind::Generation => match state.generation_slots.clone().try_acquire_owned() {
            Ok(p) => Some(p),
            Err(_) => {
                return error_response(ServiceError::Busy(format!(
                    "all {} generation slots are in use; retry later",
                    state.service.config.max_concurrent
                )))
            }
        },
        _ => None,
    };
    let _shared = match kind {
        Kind::Generation => Some(state.eval_lock.clone().read_owned().await),
        _ => None,
    };
    let _exclusive = match kind {
        Kind::Evaluation => Some(state.eval_lock.clone().write_owned().await),
        _ => None,
    };
    let start = Instant::now();
    let service = state.service.clone();
    let outcome = match tokio::task::spawn_blocking(move || f(&service)).await {
        Ok(r) => r,
        Err(e) => Err(ServiceError::Internal(format!("worker failed: {e}"))),
    };
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(o) => {
            log::info!("{} ({elapsed_ms:.1} ms)", o.summary);
            let env = Envelope {
                request: &request,
                seed: o.seed,
                timing: Timing { elapsed_ms },
                report: &o.report,
            };
            match serde_json::to_string(&env) {
                Ok(body) => json_response(StatusCode::OK, body),
                Err(e) => error_response(ServiceError::Internal(e.to_string())),
            }
        }
        Err(e) => error_response(e),
    }
}

async fn post_json<T, F>(state: AppState, kind: Kind, body: Bytes, f: F) -> Response
where
    T: DeserializeOwned + Send + 'static,
    F: FnOnce(&Service, &T) -> Result<Outcome, ServiceError> + Send + 'static,
{
    let request: Box<RawValue> = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(ServiceError::field("body", format!("malformed JSON: {e}"))),
    };
    let req: T = match parse(request.get().as_bytes()) {
        Ok(r) => r,
        Err(e) => return error_response(e),
    };
    execute(state, kind, request, move |s| f(s, &req)).await
}

fn raw(v: serde_json::Value) -> Box<RawValue> {
    RawValue::from_string(v.to_string()).expect("serialized JSON is valid")
}

async fn model(State(state): State<AppState>) -> Response {
    execute(state, Kind::Instant, raw(serde_json::Value::Null), |s| s.model_info()).await
}

async fn generate(State(state): State<AppState>, body: Bytes) -> Response {
    post_json(state, Kind::Generation, body, |s, r: &GenerateRequest| s.generate(r)).await
}

async fn steer(State(state): State<AppState>, body: Bytes) -> Response {
    post_json(state, Kind::Generation, body, |s, r: &SteerRequest| s.steer(r)).await
}

async fn vectors(State(state): State<AppState>, body: Bytes) -> Response {
    post_json(state, Kind::Generation, body, |s, r: &VectorSpecInput| s.build_vector(r)).await
}

async fn norm_profile(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Response {
    let Some(prompt) = q.get("prompt").cloned() else {
        return error_response(ServiceError::field("prompt", "query parameter is required"));
    };
    let echo = raw(serde_json::json!({ "id": id, "prompt": prompt }));
    execute(state, Kind::Generation, echo, move |s| s.norm_profile(&id, &prompt)).await
}

async fn eval(State(state): State<AppState>, Path(kind): Path<String>, body: Bytes) -> Response {
    match kind.as_str() {
        "perplexity" => post_json(state, Kind::Evaluation, body, |s, r: &PerplexityRequest| s.perplexity(r)).await,
        "shift" => post_json(state, Kind::Evaluation, body, |s, r: &ShiftRequest| s.token_shift(r)).await,
        "pk" => post_json(state, Kind::Evaluation, body, |s, r: &PkRequest| s.p_at_k(r)).await,
        "kl" => post_json(state, Kind::Evaluation, body, |s, r: &KlRequest| s.kl(r)).await,
        other => error_response(ServiceError::NotFound(format!(
            "unknown evaluation `{other}`; expected perplexity, shift, pk or kl"
        ))),
    }
}

async fn not_found() -> Response {
    error_response(ServiceError::NotFound("no such endpoint".into()))
}

fn cors(origins: &[String]) -> CorsLayer {
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
}

pub fn router(state: AppState) -> Router {
    let cors = cors(&state.service.config.cors_origins);
    Router::new()
        .route("/v1/model", get(model))
        .route("/v1/generate", post(generate))
        .route("/v1/steer", post(steer))
        .route("/v1/vectors", post(vectors))
        .route("/v1/vectors/{id}/norm-profile", get(norm_profile))
        .route("/v1/eval/{kind}", post(eval))
        .fallback(not_found)
        .with_state(state)
        .layer(cors)
}

/// Serve until Ctrl-C.
pub async fn serve(service: Service) -> std::io::Result<()> {
    let bind = service.config.bind.clone();
    let listener = tokio::net::TcpListener::bind(&bind).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(service)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
