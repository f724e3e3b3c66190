//! Caption and evaluation records, the genre registry, dataset splits and
//! JSONL persistence.

mod genre;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use genre::{canonicalize_genre, Genre};
pub use split::{make_split, DatasetSplit};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown genre {0:?}")]
    UnknownGenre(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: invalid field `{field}`: {reason}")]
    InvariantViolation {
        line: usize,
        field: &'static str,
        reason: String,
    },
    #[error("requested {requested} validation records but only {available} are available")]
    InsufficientRecords { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One music clip: genre, the extracted caption and the full generation text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub youtube_id: String,
    pub url: String,
    pub genre: Genre,
    pub caption: String,
    /// Full multi-section generation. Evaluation rows may omit it.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub sentence: String,
}

/// A caption record with the three perspective scores from a human rater.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    #[serde(flatten)]
    pub base: CaptionRecord,
    pub situation: u8,
    pub time_season: u8,
    pub emotion: u8,
}

impl EvaluationRecord {
    pub fn all_2s(&self) -> bool {
        self.situation == 2 && self.time_season == 2 && self.emotion == 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Caption,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Records {
    Caption(Vec<CaptionRecord>),
    Evaluation(Vec<EvaluationRecord>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Caption(r) => r.len(),
            Records::Evaluation(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Collapse whitespace runs and trim.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// YouTube video ids are 11 characters from the URL-safe base64 alphabet.
pub fn is_valid_youtube_id(id: &str) -> bool {
    id.len() == 11
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn violation(line: usize, field: &'static str, reason: impl Into<String>) -> DatasetError {
    DatasetError::InvariantViolation {
        line,
        field,
        reason: reason.into(),
    }
}

impl CaptionRecord {
    /// Check the per-record invariants. `require_sentence` is false for
    /// evaluation rows, which carry only the caption.
    pub fn validate(&self, line: usize, require_sentence: bool) -> Result<(), DatasetError> {
        if !is_valid_youtube_id(&self.youtube_id) {
            return Err(violation(line, "youtube_id", format!("{:?} is not an 11-character video id", self.youtube_id)));
        }
        match url::Url::parse(&self.url) {
            Ok(u) if u.has_host() => {}
            _ => return Err(violation(line, "url", format!("{:?} is not an absolute URL", self.url))),
        }
        let caption = normalize_whitespace(&self.caption);
        if caption.is_empty() {
            return Err(violation(line, "caption", "empty caption"));
        }
        if self.sentence.trim().is_empty() {
            if require_sentence {
                return Err(violation(line, "sentence", "empty sentence"));
            }
        } else if !normalize_whitespace(&self.sentence).contains(&caption) {
            return Err(violation(line, "caption", "caption does not appear within sentence"));
        }
        Ok(())
    }
}

impl EvaluationRecord {
    pub fn validate(&self, line: usize) -> Result<(), DatasetError> {
        self.base.validate(line, false)?;
        for (field, score) in [
            ("situation", self.situation),
            ("time_season", self.time_season),
            ("emotion", self.emotion),
        ] {
            if score > 2 {
                return Err(violation(line, field, format!("score {score} outside {{0,1,2}}")));
            }
        }
        Ok(())
    }
}

/// Parse a JSONL file into `T`, reporting 1-based line numbers. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        out.push((line_no, value));
    }
    Ok(out)
}

/// Write one compact JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn check_unique<'a>(ids: impl Iterator<Item = (usize, &'a str)>) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for (line, id) in ids {
        if !seen.insert(id) {
            return Err(violation(line, "youtube_id", format!("duplicate id {id:?}")));
        }
    }
    Ok(())
}

pub fn load_caption_records(path: &Path) -> Result<Vec<CaptionRecord>, DatasetError> {
    load_caption_rows(path, true)
}

/// Like [`load_caption_records`] but accepts rows without a `sentence`
/// (evaluation files, for instance); extra fields are ignored.
pub fn load_caption_records_loose(path: &Path) -> Result<Vec<CaptionRecord>, DatasetError> {
    load_caption_rows(path, false)
}

fn load_caption_rows(path: &Path, require_sentence: bool) -> Result<Vec<CaptionRecord>, DatasetError> {
    let rows: Vec<(usize, CaptionRecord)> = read_jsonl(path).map_err(genre_as_violation)?;
    for (line, r) in &rows {
        r.validate(*line, require_sentence)?;
    }
    check_unique(rows.iter().map(|(l, r)| (*l, r.youtube_id.as_str())))?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn load_evaluation_records(path: &Path) -> Result<Vec<EvaluationRecord>, DatasetError> {
    let rows: Vec<(usize, EvaluationRecord)> = read_jsonl(path).map_err(genre_as_violation)?;
    for (line, r) in &rows {
        r.validate(*line)?;
    }
    check_unique(rows.iter().map(|(l, r)| (*l, r.base.youtube_id.as_str())))?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn load_records(path: &Path, kind: RecordKind) -> Result<Records, DatasetError> {
    Ok(match kind {
        RecordKind::Caption => Records::Caption(load_caption_records(path)?),
        RecordKind::Evaluation => Records::Evaluation(load_evaluation_records(path)?),
    })
}

// serde surfaces an unknown genre as a parse failure; report it against the field.
fn genre_as_violation(e: DatasetError) -> DatasetError {
    match e {
        DatasetError::Parse { line, reason } if reason.contains("unknown genre") => {
            violation(line, "genre", reason)
        }
        other => other,
    }
}

/// Per-genre record counts over the full registry (absent genres map to zero).
pub fn genre_counts<'a, I>(genres: I) -> BTreeMap<Genre, usize>
where
    I: IntoIterator<Item = &'a Genre>,
{
    let mut counts: BTreeMap<Genre, usize> = Genre::ALL.iter().map(|g| (*g, 0)).collect();
    for g in genres {
        *counts.entry(*g).or_default() += 1;
    }
    counts
}
