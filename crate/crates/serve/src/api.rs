use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use axum::extract::{Path, Query, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use muscap_core::caption::thumbnail_url;
use muscap_core::dataset::{canonicalize_genre, read_jsonl, CaptionRecord, Genre};
use muscap_core::humeval::{report, Method, Rating};
use muscap_core::retrieve::{search, SearchResult};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::config::ServeConfig;
use crate::state::{now_rfc3339, AppState, Session, HUMEVAL_LOG, QUERY_LOG, RATING_LOG, REQUEST_LOG};
use crate::ApiError;

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

const SLOTS: [&str; 3] = ["A", "B", "C"];

pub fn router(state: Shared, cfg: &ServeConfig) -> Router {
    let cors = if cfg.cors_origins.is_empty() {
        CorsLayer::permissive()
    } else {
        let origins: Vec<HeaderValue> = cfg.cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
        CorsLayer::new()
            .allow_origin(AllowOrigin::list(origins))
            .allow_methods(tower_http::cors::Any)
            .allow_headers(tower_http::cors::Any)
    };
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/search", post(search_handler))
        .route("/api/ratings", post(rate_result))
        .route("/api/ratings/report", get(ratings_report))
        .route("/api/items", get(list_items))
        .route("/api/items/{id}", get(get_item))
        .route("/api/humeval/sessions", post(create_session))
        .route("/api/humeval/sessions/{id}/next", get(next_item))
        .route("/api/humeval/sessions/{id}/scores", post(submit_scores))
        .route("/api/humeval/report", get(humeval_report));
    let app = match &cfg.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(middleware::from_fn_with_state(state.clone(), log_request))
        .layer(cors)
        .with_state(state)
}

async fn log_request(State(state): State<Shared>, req: Request, next: Next) -> Response {
    let method = req.method().to_string();
    let path = req.uri().path().to_string();
    let started = Instant::now();
    let resp = next.run(req).await;
    let entry = serde_json::json!({
        "timestamp": now_rfc3339(),
        "method": method,
        "path": path,
        "status": resp.status().as_u16(),
        "elapsed_ms": started.elapsed().as_secs_f64() * 1e3,
    });
    if let Err(e) = state.logs.append(REQUEST_LOG, &entry) {
        tracing::warn!(error = %e, "request log write failed");
    }
    resp
}

/// Parse a JSON body; shape errors become 422 with the serde message.
fn parse_body<T: DeserializeOwned>(body: Value) -> ApiResult<T> {
    serde_json::from_value(body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
}

async fn health(State(state): State<Shared>) -> Json<Value> {
    Json(serde_json::json!({
        "status": "ok",
        "records": state.records.len(),
        "index_items": state.search.as_ref().map_or(0, |s| s.index.len()),
        "humeval_items": state.humeval_items.len(),
    }))
}

#[derive(Deserialize)]
struct SearchRequest {
    query: String,
    k: Option<usize>,
    genre: Option<String>,
}

#[derive(Serialize)]
struct SearchResponse {
    query_id: String,
    query: String,
    k: usize,
    results: Vec<SearchResult>,
}

async fn search_handler(State(state): State<Shared>, Json(body): Json<Value>) -> ApiResult<Json<SearchResponse>> {
    let req: SearchRequest = parse_body(body)?;
    if req.query.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "query must not be empty"));
    }
    let k = req.k.unwrap_or(state.default_k);
    if k == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "k must be at least 1"));
    }
    let genre = match req.genre.as_deref().filter(|g| !g.trim().is_empty()) {
        Some(g) => Some(canonicalize_genre(g).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?),
        None => None,
    };
    let backend = state
        .search
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "search index not loaded"))?;
    let results = search(&req.query, &backend.params, &backend.text_cfg, &backend.index, k, genre)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let query_id = uuid::Uuid::new_v4().to_string();
    let ids: Vec<String> = results.iter().map(|r| r.youtube_id.clone()).collect();
    state.logs.append(
        QUERY_LOG,
        &serde_json::json!({
            "query_id": query_id,
            "query": req.query,
            "k": k,
            "genre": genre.map(Genre::as_str),
            "results": ids,
            "timestamp": now_rfc3339(),
        }),
    )?;
    state.queries.lock().expect("query lock").insert(query_id.clone(), ids);
    tracing::info!(%query_id, k, hits = results.len(), "search");
    Ok(Json(SearchResponse {
        query_id,
        query: req.query,
        k,
        results,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grade {
    Excellent,
    Good,
    Fair,
    Poor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRating {
    pub query_id: String,
    pub youtube_id: String,
    pub grade: Grade,
    pub rater_id: String,
    #[serde(default)]
    pub timestamp: Option<String>,
}

async fn rate_result(State(state): State<Shared>, Json(body): Json<Value>) -> ApiResult<Json<Value>> {
    let mut rating: ResultRating = parse_body(body)?;
    if rating.rater_id.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "rater_id must not be empty"));
    }
    let known = state.queries.lock().expect("query lock").contains_key(&rating.query_id);
    if !known {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("unknown query_id {:?}", rating.query_id),
        ));
    }
    rating.timestamp = Some(now_rfc3339());
    state.logs.append(RATING_LOG, &rating)?;
    Ok(Json(serde_json::json!({ "status": "recorded" })))
}

fn read_log<T: DeserializeOwned>(state: &AppState, name: &str) -> ApiResult<Vec<T>> {
    let path = state.logs.path(name);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let rows: Vec<(usize, T)> =
        read_jsonl(&path).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Latest grade per (query, result, rater) and the grade distribution.
async fn ratings_report(State(state): State<Shared>) -> ApiResult<Json<Value>> {
    let log: Vec<ResultRating> = read_log(&state, RATING_LOG)?;
    let mut latest: BTreeMap<(String, String, String), ResultRating> = BTreeMap::new();
    for r in log {
        latest.insert((r.query_id.clone(), r.youtube_id.clone(), r.rater_id.clone()), r);
    }
    let mut counts: BTreeMap<Grade, usize> = [Grade::Excellent, Grade::Good, Grade::Fair, Grade::Poor]
        .into_iter()
        .map(|g| (g, 0))
        .collect();
    for r in latest.values() {
        *counts.entry(r.grade).or_default() += 1;
    }
    let counts: BTreeMap<String, usize> = counts
        .into_iter()
        .map(|(g, n)| (serde_json::to_value(g).unwrap().as_str().unwrap().to_string(), n))
        .collect();
    Ok(Json(serde_json::json!({
        "ratings": latest.into_values().collect::<Vec<_>>(),
        "counts": counts,
    })))
}

#[derive(Serialize)]
struct ItemView<'a> {
    #[serde(flatten)]
    record: &'a CaptionRecord,
    thumbnail_url: String,
}

fn item_view(r: &CaptionRecord) -> ItemView<'_> {
    ItemView {
        record: r,
        thumbnail_url: thumbnail_url(&r.youtube_id).unwrap_or_default(),
    }
}

#[derive(Deserialize)]
struct ItemQuery {
    genre: Option<String>,
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

async fn list_items(State(state): State<Shared>, Query(q): Query<ItemQuery>) -> ApiResult<Json<Value>> {
    let genre = match q.genre.as_deref() {
        Some(g) => Some(canonicalize_genre(g).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?),
        None => None,
    };
    let matching: Vec<&CaptionRecord> = state
        .records
        .iter()
        .filter(|r| genre.is_none_or(|g| r.genre == g))
        .collect();
    let limit = q.limit.unwrap_or(50).min(500);
    let page: Vec<ItemView> = matching.iter().skip(q.offset).take(limit).map(|r| item_view(r)).collect();
    Ok(Json(serde_json::json!({ "total": matching.len(), "offset": q.offset, "items": page })))
}

async fn get_item(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let r = state
        .record(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown item {id:?}")))?;
    Ok(Json(serde_json::to_value(item_view(r)).expect("item serializes")))
}

#[derive(Deserialize)]
struct CreateSession {
    evaluator_id: String,
    item_ids: Option<Vec<String>>,
}

/// Items this evaluator already scored (from the log), so a new session
/// resumes instead of producing duplicate ratings.
fn already_rated(state: &AppState, evaluator: &str) -> ApiResult<std::collections::HashSet<String>> {
    let log: Vec<Rating> = read_log(state, HUMEVAL_LOG)?;
    Ok(log
        .into_iter()
        .filter(|r| r.evaluator_id == evaluator)
        .map(|r| r.item_id)
        .collect())
}

async fn create_session(State(state): State<Shared>, Json(body): Json<Value>) -> ApiResult<Response> {
    let req: CreateSession = parse_body(body)?;
    let evaluator_id = req.evaluator_id.trim().to_string();
    if evaluator_id.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "evaluator_id must not be empty"));
    }
    if state.humeval_items.is_empty() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no evaluation items loaded"));
    }
    let position: HashMap<&str, usize> = state
        .humeval_items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.item_id.as_str(), i))
        .collect();
    let wanted: Vec<usize> = match &req.item_ids {
        Some(ids) => ids
            .iter()
            .map(|id| {
                position
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown item {id:?}")))
            })
            .collect::<ApiResult<_>>()?,
        None => (0..state.humeval_items.len()).collect(),
    };
    let done = already_rated(&state, &evaluator_id)?;
    let mut seen = std::collections::HashSet::new();
    let queue: Vec<usize> = wanted
        .into_iter()
        .filter(|&i| seen.insert(i) && !done.contains(&state.humeval_items[i].item_id))
        .collect();
    let session_id = uuid::Uuid::new_v4().to_string();
    let total = queue.len();
    state.sessions.lock().expect("session lock").insert(
        session_id.clone(),
        Session {
            evaluator_id: evaluator_id.clone(),
            queue,
            cursor: 0,
        },
    );
    tracing::info!(%session_id, %evaluator_id, total, "humeval session created");
    let body = serde_json::json!({ "session_id": session_id, "evaluator_id": evaluator_id, "total": total });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

#[derive(Serialize)]
struct SlotCaption {
    slot: &'static str,
    caption: String,
}

#[derive(Serialize)]
struct NextItem {
    session_id: String,
    position: usize,
    total: usize,
    item_id: String,
    youtube_id: Option<String>,
    url: Option<String>,
    thumbnail_url: Option<String>,
    slots: Vec<SlotCaption>,
}

async fn next_item(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let sessions = state.sessions.lock().expect("session lock");
    let s = sessions
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))?;
    let Some(&idx) = s.queue.get(s.cursor) else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let item = &state.humeval_items[idx];
    let order = state.method_order(&item.item_id, &s.evaluator_id);
    let slots = SLOTS
        .iter()
        .zip(&order)
        .map(|(slot, m)| SlotCaption {
            slot,
            caption: item.captions[m].clone(),
        })
        .collect();
    let youtube_id = item.youtube_id.clone();
    let next = NextItem {
        session_id: id.clone(),
        position: s.cursor,
        total: s.queue.len(),
        item_id: item.item_id.clone(),
        url: youtube_id
            .as_deref()
            .and_then(|y| state.record(y).map(|r| r.url.clone()).or_else(|| muscap_core::caption::watch_url(y).ok())),
        thumbnail_url: youtube_id.as_deref().and_then(|y| thumbnail_url(y).ok()),
        youtube_id,
        slots,
    };
    Ok(Json(next).into_response())
}

#[derive(Deserialize)]
struct SlotScores {
    situation: u8,
    time_season: u8,
    emotion: u8,
}

#[derive(Deserialize)]
struct ScoreSubmission {
    item_id: String,
    scores: BTreeMap<String, SlotScores>,
}

async fn submit_scores(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<Value>,
) -> ApiResult<Json<Value>> {
    let sub: ScoreSubmission = parse_body(body)?;
    // Held across validation and the log write so one session's
    // submissions are applied strictly in order.
    let mut sessions = state.sessions.lock().expect("session lock");
    let s = sessions
        .get_mut(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))?;
    let Some(&idx) = s.queue.get(s.cursor) else {
        return Err(ApiError::new(StatusCode::CONFLICT, "session already complete"));
    };
    let item = &state.humeval_items[idx];
    if sub.item_id != item.item_id {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("expected scores for {:?}, got {:?}", item.item_id, sub.item_id),
        ));
    }
    let expected: Vec<&str> = SLOTS.to_vec();
    let got: Vec<&str> = sub.scores.keys().map(String::as_str).collect();
    if got != expected {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("scores must cover slots {expected:?}, got {got:?}"),
        ));
    }
    let order: Vec<Method> = state.method_order(&item.item_id, &s.evaluator_id);
    let timestamp = now_rfc3339();
    let ratings: Vec<Rating> = SLOTS
        .iter()
        .zip(&order)
        .map(|(slot, &method)| {
            let sc = &sub.scores[*slot];
            Rating {
                item_id: item.item_id.clone(),
                method,
                evaluator_id: s.evaluator_id.clone(),
                situation: sc.situation,
                time_season: sc.time_season,
                emotion: sc.emotion,
                timestamp: Some(timestamp.clone()),
            }
        })
        .collect();
    for r in &ratings {
        r.validate()
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    }
    for r in &ratings {
        state.logs.append(HUMEVAL_LOG, r)?;
    }
    s.cursor += 1;
    let remaining = s.queue.len() - s.cursor;
    Ok(Json(serde_json::json!({ "recorded": ratings.len(), "remaining": remaining })))
}

async fn humeval_report(State(state): State<Shared>) -> ApiResult<Json<Value>> {
    let log: Vec<Rating> = read_log(&state, HUMEVAL_LOG)?;
    let rep = report(&log).map_err(|e| ApiError::new(StatusCode::CONFLICT, e.to_string()))?;
    Ok(Json(serde_json::to_value(rep).expect("report serializes")))
}
