use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use muscap_core::caption::{
    caption_clip, image_request, CaptionError, GenerationClient, HttpClient, HttpClientConfig,
    ImageSource, PromptTemplate, CHAT_COMPLETIONS_PATH,
};
use muscap_core::dataset::Genre;
use serde_json::{json, Value};

const REPLY: &str = "1. A neon skyline.\n2. A late drive through the city.\n3. Summer night.\n4. Calm and wistful.\n5. A mellow track for a late summer drive through a neon city.";

#[derive(Clone, Default)]
struct Script {
    calls: Arc<AtomicUsize>,
    fail_first: usize,
    fail_status: u16,
    bodies: Arc<Mutex<Vec<Value>>>,
}

async fn handler(State(s): State<Script>, Json(body): Json<Value>) -> Response {
    let n = s.calls.fetch_add(1, Ordering::SeqCst);
    s.bodies.lock().unwrap().push(body);
    if n < s.fail_first {
        let status = StatusCode::from_u16(s.fail_status).unwrap();
        return (status, [("retry-after", "0")], "busy").into_response();
    }
    Json(json!({"choices": [{"message": {"role": "assistant", "content": REPLY}}]})).into_response()
}

async fn spawn(script: Script) -> String {
    let app = Router::new().route(CHAT_COMPLETIONS_PATH, post(handler)).with_state(script);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn fast(base: String) -> HttpClient {
    let mut cfg = HttpClientConfig::new(base);
    cfg.initial_backoff = Duration::from_millis(5);
    cfg.max_backoff = Duration::from_millis(20);
    cfg.timeout = Duration::from_secs(5);
    HttpClient::new(cfg).unwrap()
}

fn request() -> muscap_core::caption::GenerationRequest {
    let img = ImageSource::Bytes { data: vec![0xff, 0xd8, 0xff], mime: "image/jpeg".into() };
    image_request("dQw4w9WgXcQ", img, &PromptTemplate::default(), "test-model")
}

#[tokio::test]
async fn retries_rate_limits_then_succeeds() {
    let script = Script { fail_first: 2, fail_status: 429, ..Default::default() };
    let client = fast(spawn(script.clone()).await);
    let rec = caption_clip(&request(), &client, "https://www.youtube.com/watch?v=dQw4w9WgXcQ", Genre::Chill)
        .await
        .unwrap();
    assert_eq!(script.calls.load(Ordering::SeqCst), 3);
    assert_eq!(rec.caption, "A mellow track for a late summer drive through a neon city.");
    assert!(rec.sentence.starts_with("1. A neon skyline."));

    let body = &script.bodies.lock().unwrap()[0];
    assert_eq!(body["model"], "test-model");
    let content = &body["messages"][0]["content"];
    assert_eq!(content[0]["type"], "text");
    assert!(content[1]["image_url"]["url"].as_str().unwrap().starts_with("data:image/jpeg;base64,"));
}

#[tokio::test]
async fn server_errors_exhaust_attempts() {
    let script = Script { fail_first: 100, fail_status: 503, ..Default::default() };
    let client = fast(spawn(script.clone()).await);
    let err = client.complete(&request()).await.unwrap_err();
    assert!(matches!(err, CaptionError::EndpointUnreachable(_)), "{err:?}");
    assert_eq!(script.calls.load(Ordering::SeqCst), 4);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let script = Script { fail_first: 100, fail_status: 400, ..Default::default() };
    let client = fast(spawn(script.clone()).await);
    let err = client.complete(&request()).await.unwrap_err();
    assert!(matches!(err, CaptionError::Rejected { status: 400, .. }), "{err:?}");
    assert_eq!(script.calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn unreachable_endpoint() {
    // Bind then drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = fast(format!("http://127.0.0.1:{port}"));
    let err = client.complete(&request()).await.unwrap_err();
    assert!(matches!(err, CaptionError::EndpointUnreachable(_)), "{err:?}");
}
