//! Scripted stand-in for a chat-completions vision-language endpoint.
//!
//! Replies are keyed by name: a request gets the reply whose key occurs in
//! its image reference (URL, or the decoded bytes of a data URL), then in
//! its prompt. Unmatched requests get the `default` reply if one exists and
//! a 404 otherwise. The first `fail_first` requests are answered with
//! `fail_status` to exercise client retries.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use base64::Engine;
use muscap_core::caption::CHAT_COMPLETIONS_PATH;
use serde_json::{json, Value};

#[derive(Debug, Clone, Default)]
pub struct MockScript {
    pub replies: BTreeMap<String, String>,
    pub fail_first: usize,
    pub fail_status: u16,
}

impl MockScript {
    /// One reply per `*.txt` file in `dir`, keyed by file stem.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut replies = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    replies.insert(stem.to_string(), std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(Self {
            replies,
            fail_first: 0,
            fail_status: 503,
        })
    }

    fn reply_for(&self, body: &Value) -> Option<&str> {
        let content = body.pointer("/messages/0/content");
        let parts: Vec<&Value> = match content {
            Some(Value::Array(a)) => a.iter().collect(),
            Some(v) => vec![v],
            None => vec![],
        };
        let mut image = String::new();
        let mut prompt = String::new();
        for p in parts {
            if let Some(url) = p.pointer("/image_url/url").and_then(Value::as_str) {
                image.push_str(&decode_data_url(url).unwrap_or_else(|| url.to_string()));
            } else if let Some(t) = p.get("text").and_then(Value::as_str) {
                prompt.push_str(t);
            } else if let Some(t) = p.as_str() {
                prompt.push_str(t);
            }
        }
        let keyed = |hay: &str| {
            self.replies
                .iter()
                .find(|(k, _)| k.as_str() != "default" && hay.contains(k.as_str()))
                .map(|(_, v)| v.as_str())
        };
        keyed(&image)
            .or_else(|| keyed(&prompt))
            .or_else(|| self.replies.get("default").map(String::as_str))
    }
}

fn decode_data_url(url: &str) -> Option<String> {
    let (_, data) = url.strip_prefix("data:")?.split_once(";base64,")?;
    let bytes = base64::engine::general_purpose::STANDARD.decode(data).ok()?;
    Some(String::from_utf8_lossy(&bytes).into_owned())
}

#[derive(Clone)]
struct MockState {
    script: Arc<MockScript>,
    requests: Arc<AtomicUsize>,
}

/// Shared request counter for a running mock.
#[derive(Debug, Clone, Default)]
pub struct MockHandle {
    pub requests: Arc<AtomicUsize>,
}

impl MockHandle {
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

pub fn mock_router(script: MockScript) -> (Router, MockHandle) {
    let handle = MockHandle::default();
    let state = MockState {
        script: Arc::new(script),
        requests: handle.requests.clone(),
    };
    let router = Router::new()
        .route(CHAT_COMPLETIONS_PATH, post(complete))
        .with_state(state);
    (router, handle)
}

async fn complete(State(state): State<MockState>, Json(body): Json<Value>) -> Response {
    let n = state.requests.fetch_add(1, Ordering::SeqCst);
    if n < state.script.fail_first {
        let status = StatusCode::from_u16(state.script.fail_status).unwrap_or(StatusCode::SERVICE_UNAVAILABLE);
        return (status, [("retry-after", "0")], "scripted failure").into_response();
    }
    match state.script.reply_for(&body) {
        Some(text) => Json(json!({
            "id": format!("mock-{n}"),
            "object": "chat.completion",
            "model": body.get("model").cloned().unwrap_or(Value::Null),
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": text},
                "finish_reason": "stop"
            }]
        }))
        .into_response(),
        None => (StatusCode::NOT_FOUND, "no scripted reply").into_response(),
    }
}

/// Bind `addr` and serve the mock until the task is dropped.
pub async fn serve_mock(addr: &str, script: MockScript) -> std::io::Result<(std::net::SocketAddr, MockHandle)> {
    let (router, handle) = mock_router(script);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).await {
            tracing::error!(error = %e, "mock endpoint stopped");
        }
    });
    Ok((local, handle))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script() -> MockScript {
        let mut replies = BTreeMap::new();
        replies.insert("abc".to_string(), "reply abc".to_string());
        replies.insert("default".to_string(), "fallback".to_string());
        MockScript { replies, fail_first: 0, fail_status: 503 }
    }

    fn body(url: &str) -> Value {
        json!({"messages": [{"role": "user", "content": [
            {"type": "text", "text": "describe"},
            {"type": "image_url", "image_url": {"url": url}}
        ]}]})
    }

    #[test]
    fn replies_by_key_then_default() {
        let s = script();
        assert_eq!(s.reply_for(&body("https://i.ytimg.com/vi/abc/hqdefault.jpg")), Some("reply abc"));
        assert_eq!(s.reply_for(&body("https://example.com/x.jpg")), Some("fallback"));
        let data = format!("data:image/jpeg;base64,{}", base64::engine::general_purpose::STANDARD.encode("xxabcxx"));
        assert_eq!(s.reply_for(&body(&data)), Some("reply abc"));
    }
}
