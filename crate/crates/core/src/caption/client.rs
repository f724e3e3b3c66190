use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::CaptionError;

pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const CHAT_COMPLETIONS_PATH: &str = "/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    /// Raw image bytes, sent inline as a base64 data URL.
    Bytes { data: Vec<u8>, mime: String },
    Url(String),
}

impl ImageSource {
    /// Value for the `image_url.url` field.
    pub fn to_url(&self) -> String {
        match self {
            ImageSource::Bytes { data, mime } => format!(
                "data:{mime};base64,{}",
                base64::engine::general_purpose::STANDARD.encode(data)
            ),
            ImageSource::Url(u) => u.clone(),
        }
    }

    /// Guess the MIME type from a file extension.
    pub fn mime_for_path(path: &std::path::Path) -> &'static str {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("png") => "image/png",
            Some("webp") => "image/webp",
            Some("gif") => "image/gif",
            _ => "image/jpeg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    /// Caller-chosen key used for logging and by fixture clients (usually the video id).
    pub request_id: String,
    /// `None` for text-only requests.
    pub image: Option<ImageSource>,
    pub prompt: String,
    pub model_id: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), CaptionError> {
        if self.max_tokens == 0 {
            return Err(CaptionError::InvalidRequest("max_tokens must be positive".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(CaptionError::InvalidRequest(format!(
                "temperature {} must be finite and non-negative",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Chat-completions request body.
    pub fn to_wire(&self) -> Value {
        let mut content = vec![json!({"type": "text", "text": self.prompt})];
        if let Some(img) = &self.image {
            content.push(json!({"type": "image_url", "image_url": {"url": img.to_url()}}));
        }
        json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": content}],
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        })
    }
}

/// Pull the generated text out of a chat-completions response body.
pub fn extract_text(body: &Value) -> Result<String, CaptionError> {
    let content = body
        .pointer("/choices/0/message/content")
        .ok_or_else(|| CaptionError::MalformedResponse("no choices[0].message.content".into()))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        // Some servers return a list of typed parts.
        Value::Array(parts) => {
            let text: Vec<&str> = parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect();
            if text.is_empty() {
                Err(CaptionError::MalformedResponse("content has no text parts".into()))
            } else {
                Ok(text.concat())
            }
        }
        _ => Err(CaptionError::MalformedResponse("content is not text".into())),
    }
}

/// Anything that turns a [`GenerationRequest`] into generated text.
pub trait GenerationClient: Send + Sync {
    fn complete(
        &self,
        request: &GenerationRequest,
    ) -> impl Future<Output = Result<String, CaptionError>> + Send;
}

#[derive(Debug, Clone)]
pub struct HttpClientConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl HttpClientConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            max_attempts: 4,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            timeout: Duration::from_secs(120),
            max_in_flight: 4,
        }
    }
}

/// HTTP client for a chat-completions style vision-language endpoint.
///
/// Transient failures (connection errors, timeouts, 429 and 5xx) are retried
/// with exponential backoff; a `Retry-After` header lengthens the wait.
/// At most `max_in_flight` requests are outstanding at once.
#[derive(Clone)]
pub struct HttpClient {
    http: reqwest::Client,
    config: HttpClientConfig,
    permits: Arc<Semaphore>,
}

enum Attempt {
    Retry(CaptionError, Option<Duration>),
    Fatal(CaptionError),
}

impl HttpClient {
    pub fn new(config: HttpClientConfig) -> Result<Self, CaptionError> {
        if config.max_attempts == 0 || config.max_in_flight == 0 {
            return Err(CaptionError::InvalidRequest(
                "max_attempts and max_in_flight must be positive".into(),
            ));
        }
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| CaptionError::EndpointUnreachable(e.to_string()))?;
        Ok(Self {
            http,
            permits: Arc::new(Semaphore::new(config.max_in_flight)),
            config,
        })
    }

    pub fn config(&self) -> &HttpClientConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), CHAT_COMPLETIONS_PATH)
    }

    async fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let mut req = self.http.post(self.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) => {
                return Err(Attempt::Retry(CaptionError::EndpointUnreachable(e.to_string()), None));
            }
        };
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        if status.as_u16() == 429 {
            return Err(Attempt::Retry(CaptionError::RateLimited { retry_after }, retry_after));
        }
        if status.is_server_error() {
            return Err(Attempt::Retry(
                CaptionError::EndpointUnreachable(format!("server error {status}")),
                retry_after,
            ));
        }
        let text = resp
            .text()
            .await
            .map_err(|e| Attempt::Retry(CaptionError::EndpointUnreachable(e.to_string()), None))?;
        if !status.is_success() {
            return Err(Attempt::Fatal(CaptionError::Rejected {
                status: status.as_u16(),
                body: text,
            }));
        }
        let json: Value = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(CaptionError::MalformedResponse(e.to_string())))?;
        extract_text(&json).map_err(Attempt::Fatal)
    }
}

impl GenerationClient for HttpClient {
    async fn complete(&self, request: &GenerationRequest) -> Result<String, CaptionError> {
        request.validate()?;
        let body = request.to_wire();
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|e| CaptionError::EndpointUnreachable(e.to_string()))?;
        let mut backoff = self.config.initial_backoff;
        let mut attempt = 1;
        loop {
            let started = Instant::now();
            tracing::info!(request_id = %request.request_id, attempt, model = %request.model_id, "generation request");
            match self.attempt(&body).await {
                Ok(text) => {
                    tracing::info!(
                        request_id = %request.request_id,
                        attempt,
                        elapsed_ms = started.elapsed().as_millis() as u64,
                        chars = text.len(),
                        "generation response"
                    );
                    return Ok(text);
                }
                Err(Attempt::Fatal(e)) => {
                    tracing::warn!(request_id = %request.request_id, attempt, error = %e, "generation failed");
                    return Err(e);
                }
                Err(Attempt::Retry(e, hint)) => {
                    tracing::warn!(request_id = %request.request_id, attempt, error = %e, "transient generation failure");
                    if attempt >= self.config.max_attempts {
                        return Err(e);
                    }
                    let wait = hint.map_or(backoff, |h| h.max(backoff)).min(self.config.max_backoff);
                    tokio::time::sleep(wait).await;
                    backoff = (backoff * 2).min(self.config.max_backoff);
                    attempt += 1;
                }
            }
        }
    }
}

/// Offline client answering from canned files: `<dir>/<request_id>.txt`,
/// falling back to `<dir>/default.txt`.
#[derive(Debug, Clone)]
pub struct FixtureClient {
    dir: PathBuf,
}

impl FixtureClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl GenerationClient for FixtureClient {
    async fn complete(&self, request: &GenerationRequest) -> Result<String, CaptionError> {
        request.validate()?;
        let specific = self.dir.join(format!("{}.txt", request.request_id));
        let path = if specific.is_file() {
            specific
        } else {
            self.dir.join("default.txt")
        };
        tracing::info!(request_id = %request.request_id, fixture = %path.display(), "fixture response");
        std::fs::read_to_string(&path).map_err(|e| CaptionError::FixtureMissing {
            path,
            reason: e.to_string(),
        })
    }
}

/// Runtime choice between the live endpoint and canned fixtures.
#[derive(Clone)]
pub enum AnyClient {
    Http(HttpClient),
    Fixture(FixtureClient),
}

impl GenerationClient for AnyClient {
    async fn complete(&self, request: &GenerationRequest) -> Result<String, CaptionError> {
        match self {
            AnyClient::Http(c) => c.complete(request).await,
            AnyClient::Fixture(c) => c.complete(request).await,
        }
    }
}
