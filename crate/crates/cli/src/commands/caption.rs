use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use futures::stream::{self, StreamExt};
use muscap_core::caption::{
    caption_clip, image_request, thumbnail_url, watch_url, AnyClient, CaptionError, FixtureClient, HttpClient,
    HttpClientConfig, ImageSource, PromptTemplate,
};
use muscap_core::dataset::{read_jsonl, write_jsonl, CaptionRecord, Genre};
use serde::Deserialize;

use crate::config::Config;

#[derive(clap::Args)]
pub struct Args {
    /// JSONL manifest: `youtube_id`, `genre`, optional `image` (path or URL) and `url`.
    #[arg(long)]
    input: PathBuf,
    /// Output caption dataset (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Answer from canned `<youtube_id>.txt` files in this directory instead of an endpoint.
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Endpoint base URL (overrides config and MUSCAP_ENDPOINT).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model identifier sent with each request.
    #[arg(long)]
    model: Option<String>,
    /// Exit with status 1 if any clip fails (successful clips are still written).
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    youtube_id: String,
    genre: Genre,
    #[serde(default)]
    image: Option<String>,
    #[serde(default)]
    url: Option<String>,
}

fn image_for(row: &ManifestRow, base: &Path) -> Result<ImageSource, CaptionError> {
    match &row.image {
        Some(s) if s.starts_with("http://") || s.starts_with("https://") => Ok(ImageSource::Url(s.clone())),
        Some(s) => {
            let path = base.join(s);
            let data = std::fs::read(&path)
                .map_err(|e| CaptionError::InvalidRequest(format!("image {}: {e}", path.display())))?;
            Ok(ImageSource::Bytes {
                data,
                mime: ImageSource::mime_for_path(&path).to_string(),
            })
        }
        None => Ok(ImageSource::Url(thumbnail_url(&row.youtube_id)?)),
    }
}

async fn caption_row(row: &ManifestRow, base: &Path, client: &AnyClient, model: &str) -> Result<CaptionRecord, CaptionError> {
    let image = image_for(row, base)?;
    let url = match &row.url {
        Some(u) => u.clone(),
        None => watch_url(&row.youtube_id)?,
    };
    let request = image_request(&row.youtube_id, image, &PromptTemplate::default(), model);
    caption_clip(&request, client, &url, row.genre).await
}

pub fn run(args: Args, cfg: &Config) -> anyhow::Result<()> {
    let rows: Vec<(usize, ManifestRow)> =
        read_jsonl(&args.input).with_context(|| format!("reading manifest {}", args.input.display()))?;
    let base = args.input.parent().map(Path::to_path_buf).unwrap_or_default();
    let model = args.model.unwrap_or_else(|| cfg.endpoint.model_id.clone());
    let client = match &args.mock {
        Some(dir) => AnyClient::Fixture(FixtureClient::new(dir)),
        None => {
            let mut http = HttpClientConfig::new(args.endpoint.unwrap_or_else(|| cfg.endpoint.base_url.clone()));
            http.api_key = std::env::var(&cfg.endpoint.api_key_env).ok();
            http.max_attempts = cfg.endpoint.max_attempts;
            http.max_in_flight = cfg.endpoint.max_in_flight;
            http.timeout = Duration::from_secs(cfg.endpoint.timeout_secs);
            http.initial_backoff = Duration::from_millis(cfg.endpoint.initial_backoff_ms);
            AnyClient::Http(HttpClient::new(http)?)
        }
    };
    let concurrency = cfg.endpoint.max_in_flight.max(1);
    let outcomes: Vec<Result<CaptionRecord, CaptionError>> = super::runtime()?.block_on(async {
        stream::iter(rows.iter())
            .map(|(_, row)| caption_row(row, &base, &client, &model))
            .buffered(concurrency)
            .collect()
            .await
    });

    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for ((line, row), outcome) in rows.iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => {
                failures += 1;
                tracing::warn!(line, youtube_id = %row.youtube_id, error = %e, "clip skipped");
            }
        }
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        super::ensure_dir(dir)?;
    }
    write_jsonl(&args.out, &records)?;
    tracing::info!(written = records.len(), failed = failures, out = %args.out.display(), "captioning finished");
    if failures > 0 && args.strict {
        bail!("{failures} of {} clips failed", rows.len());
    }
    Ok(())
}
