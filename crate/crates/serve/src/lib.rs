//! JSON API over a trained caption/audio model: text search, result
//! ratings, dataset browsing and blinded human-evaluation sessions.
//!
//! All annotations are appended to JSONL logs under the configured log
//! directory; report endpoints recompute from those logs on every call.

mod api;
pub mod config;
pub mod mock;
mod state;

use std::sync::Arc;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

pub use api::router;
pub use config::ServeConfig;
pub use state::{AppState, SearchBackend, HUMEVAL_LOG, QUERY_LOG, RATING_LOG, REQUEST_LOG};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] muscap_core::dataset::DatasetError),
    #[error(transparent)]
    Model(#[from] muscap_core::duoenc::DuoencError),
    #[error(transparent)]
    Feature(#[from] muscap_core::featurize::FeatureError),
    #[error(transparent)]
    Retrieve(#[from] muscap_core::retrieve::RetrieveError),
    #[error(transparent)]
    Humeval(#[from] muscap_core::humeval::HumevalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// JSON error body with an HTTP status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        tracing::error!(error = %e, "log write failed");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

/// Load state from `cfg` and serve until ctrl-c.
pub async fn run(cfg: ServeConfig) -> Result<(), ServeError> {
    let state = Arc::new(AppState::load(&cfg)?);
    let app = router(state, &cfg);
    let listener = tokio::net::TcpListener::bind(&cfg.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
