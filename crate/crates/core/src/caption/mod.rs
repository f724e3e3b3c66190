//! Caption generation from thumbnail images.
//!
//! A five-section prompt asks a vision-language model to describe the
//! thumbnail first and only then the listening situation, time/season and
//! emotion, closing with a one-sentence summary. Keeping the image
//! description in its own section lets [`parse_sections`] drop it, so the
//! stored caption (section 5) talks about the music rather than the picture.

mod client;
mod parse;
mod prompt;

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::{is_valid_youtube_id, CaptionRecord, DatasetError, Genre};

pub use client::{
    extract_text, AnyClient, FixtureClient, GenerationClient, GenerationRequest, HttpClient,
    HttpClientConfig, ImageSource, CHAT_COMPLETIONS_PATH, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE,
};
pub use parse::{format_sections, parse_sections, MarkerStyle, ParsedGeneration, SECTION_COUNT};
pub use prompt::{render_prompt, render_tag_prompt, PromptTemplate, SectionKind, SectionSpec};

#[derive(Debug, Error)]
pub enum CaptionError {
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed video id {0:?}")]
    MalformedId(String),
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<std::time::Duration> },
    #[error("endpoint rejected request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no fixture response at {path}: {reason}")]
    FixtureMissing { path: PathBuf, reason: String },
    #[error("section {0} is missing")]
    MissingSection(usize),
    #[error("section {0} is empty")]
    EmptySection(usize),
    #[error("more than five sections")]
    TooManySections,
    #[error("baseline needs at least one tag")]
    EmptyTags,
    #[error(transparent)]
    Record(#[from] DatasetError),
}

/// Standard high-quality thumbnail for a video id.
pub fn thumbnail_url(youtube_id: &str) -> Result<String, CaptionError> {
    if !is_valid_youtube_id(youtube_id) {
        return Err(CaptionError::MalformedId(youtube_id.to_string()));
    }
    Ok(format!("https://i.ytimg.com/vi/{youtube_id}/hqdefault.jpg"))
}

/// Watch-page URL for a video id.
pub fn watch_url(youtube_id: &str) -> Result<String, CaptionError> {
    if !is_valid_youtube_id(youtube_id) {
        return Err(CaptionError::MalformedId(youtube_id.to_string()));
    }
    Ok(format!("https://www.youtube.com/watch?v={youtube_id}"))
}

/// Send one request through `client` and return the raw generated text.
pub async fn generate<C: GenerationClient>(
    request: &GenerationRequest,
    client: &C,
) -> Result<String, CaptionError> {
    let text = client.complete(request).await?;
    if text.trim().is_empty() {
        return Err(CaptionError::MalformedResponse("empty generation".into()));
    }
    Ok(text)
}

/// Caption = section 5, sentence = the full generation.
pub fn to_caption_record(
    parsed: &ParsedGeneration,
    youtube_id: &str,
    url: &str,
    genre: Genre,
) -> Result<CaptionRecord, CaptionError> {
    let record = CaptionRecord {
        youtube_id: youtube_id.to_string(),
        url: url.to_string(),
        genre,
        caption: parsed.summary().to_string(),
        sentence: parsed.raw.trim().to_string(),
    };
    record.validate(0, true)?;
    Ok(record)
}

/// Build the image request for one clip under `template`.
pub fn image_request(
    youtube_id: &str,
    image: ImageSource,
    template: &PromptTemplate,
    model_id: &str,
) -> GenerationRequest {
    GenerationRequest {
        request_id: youtube_id.to_string(),
        image: Some(image),
        prompt: render_prompt(template),
        model_id: model_id.to_string(),
        max_tokens: DEFAULT_MAX_TOKENS,
        temperature: DEFAULT_TEMPERATURE,
    }
}

/// Generate, parse and package one clip.
pub async fn caption_clip<C: GenerationClient>(
    request: &GenerationRequest,
    client: &C,
    url: &str,
    genre: Genre,
) -> Result<CaptionRecord, CaptionError> {
    let raw = generate(request, client).await?;
    let parsed = parse_sections(&raw)?;
    to_caption_record(&parsed, &request.request_id, url, genre)
}

/// Tag-based text-only baseline: the tags go into a prompt asking for
/// non-musical aspects, and the reply is returned verbatim.
pub async fn generate_baseline_from_tags<C: GenerationClient>(
    tags: &[String],
    request_id: &str,
    model_id: &str,
    client: &C,
) -> Result<String, CaptionError> {
    if tags.iter().all(|t| t.trim().is_empty()) {
        return Err(CaptionError::EmptyTags);
    }
    let tags: Vec<String> = tags
        .iter()
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect();
    let request = GenerationRequest {
        request_id: request_id.to_string(),
        image: None,
        prompt: render_tag_prompt(&tags),
        model_id: model_id.to_string(),
        max_tokens: DEFAULT_MAX_TOKENS,
        temperature: DEFAULT_TEMPERATURE,
    };
    Ok(generate(&request, client).await?.trim().to_string())
}
