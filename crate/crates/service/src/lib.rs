//! `POST /v1/classify` and `GET /v1/health` over a shared, immutable
//! pipeline.
//!
//! The classify body is a raw binary netpbm image (P5 or P6). Responses are
//! JSON; see [`hosvd_core::api`] for the schemas.

use std::future::Future;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use thiserror::Error;
use tokio::net::TcpListener;

use hosvd_core::api::{model_id, ClassifyResponse, ErrorResponse, HealthResponse};
use hosvd_core::classifier::model_from_bytes;
use hosvd_core::cnn::load_network;
use hosvd_core::container::FormatError;
use hosvd_core::pipeline::{Pipeline, PipelineError};

pub const DEFAULT_MAX_BODY: usize = 8 * 1024 * 1024;
pub const MIN_MAX_BODY: usize = 1024;
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Load { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub model_path: PathBuf,
    /// Needed for vector-mode models.
    pub cnn_path: Option<PathBuf>,
    pub max_body_bytes: usize,
}

impl ServiceConfig {
    pub fn new(model_path: impl Into<PathBuf>) -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            model_path: model_path.into(),
            cnn_path: None,
            max_body_bytes: DEFAULT_MAX_BODY,
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.port == 0 {
            return Err(ServiceError::Config("port must be in 1..=65535".into()));
        }
        if self.max_body_bytes < MIN_MAX_BODY {
            return Err(ServiceError::Config(format!(
                "max body {} is below the {MIN_MAX_BODY}-byte minimum",
                self.max_body_bytes
            )));
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}

/// Everything a request handler reads; never mutated after construction.
#[derive(Debug)]
pub struct AppState {
    pipeline: Pipeline,
    model_id: String,
}

impl AppState {
    pub fn new(pipeline: Pipeline, model_id: String) -> Self {
        Self { pipeline, model_id }
    }

    /// Loads the model (and network) files named by `cfg`.
    pub fn load(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let bytes = std::fs::read(&cfg.model_path)?;
        let model = model_from_bytes(&bytes).map_err(|source| ServiceError::Load {
            path: cfg.model_path.clone(),
            source,
        })?;
        let cnn = cfg
            .cnn_path
            .as_ref()
            .map(|p| {
                load_network(p).map_err(|source| ServiceError::Load {
                    path: p.clone(),
                    source,
                })
            })
            .transpose()?;
        Ok(Self::new(Pipeline::new(model, cnn)?, model_id(&bytes)))
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    /// The response body the classify endpoint produces for `body`.
    pub fn classify(&self, body: &[u8]) -> Result<ClassifyResponse, PipelineError> {
        let result = self.pipeline.classify_image_bytes(body)?;
        Ok(ClassifyResponse::from_result(
            &result,
            self.pipeline.model().class_labels(),
            &self.model_id,
        ))
    }
}

fn json(status: StatusCode, body: &impl serde::Serialize) -> Response {
    let text = serde_json::to_vec(body).expect("response types serialize");
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn error(status: StatusCode, message: String) -> Response {
    json(status, &ErrorResponse { error: message })
}

async fn classify(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let worker = Arc::clone(&state);
    let outcome = tokio::task::spawn_blocking(move || worker.classify(&body)).await;
    match outcome {
        Ok(Ok(resp)) => {
            tracing::info!(label = %resp.label, margin = resp.margin, "classified");
            json(StatusCode::OK, &resp)
        }
        Ok(Err(e @ PipelineError::Image(_))) => {
            tracing::info!(error = %e, "rejected body");
            error(StatusCode::BAD_REQUEST, e.to_string())
        }
        Ok(Err(e)) => {
            tracing::error!(error = %e, "classification failed");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
        Err(e) => {
            tracing::error!(error = %e, "classification task failed");
            error(StatusCode::INTERNAL_SERVER_ERROR, "internal error".into())
        }
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    json(
        StatusCode::OK,
        &HealthResponse {
            status: "ok".into(),
            model_id: state.model_id.clone(),
        },
    )
}

/// Routes with the body limit applied. Other methods on either path get 405;
/// `HEAD /v1/health` answers like GET without a body.
pub fn router(state: Arc<AppState>, max_body_bytes: usize) -> Router {
    Router::new()
        .route("/v1/classify", post(classify))
        .route("/v1/health", get(health))
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    listener: TcpListener,
    state: Arc<AppState>,
    max_body_bytes: usize,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    tracing::info!(addr = %listener.local_addr()?, model_id = %state.model_id, "listening");
    axum::serve(listener, router(state, max_body_bytes))
        .with_graceful_shutdown(shutdown)
        .await?;
    tracing::info!("shut down");
    Ok(())
}

/// Validates `cfg`, loads the model, binds and serves until Ctrl-C.
pub async fn run(cfg: ServiceConfig) -> Result<(), ServiceError> {
    cfg.validate()?;
    let state = Arc::new(AppState::load(&cfg)?);
    let listener = TcpListener::bind(cfg.addr()).await?;
    serve(listener, state, cfg.max_body_bytes, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
