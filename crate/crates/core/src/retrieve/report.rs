use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::feature_matrix;
use super::metrics::{median_rank, rank_in_scores, recall_at_k};
use super::RetrieveError;
use crate::dataset::{CaptionRecord, Genre};
use crate::duoenc::{embed, ModelParams, Side};
use crate::featurize::FeatureSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    TextToAudio,
    AudioToText,
}

/// Which candidates a query is ranked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// Every test item; results are still grouped by the query's genre.
    #[default]
    Global,
    /// Only items sharing the query's genre.
    PerGenre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreMetrics {
    pub genre: Genre,
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
    pub medr: f64,
    pub n: usize,
}

impl GenreMetrics {
    pub fn from_ranks(genre: Genre, ranks: &[usize]) -> Result<Self, RetrieveError> {
        Ok(Self {
            genre,
            r1: recall_at_k(ranks, 1)?,
            r5: recall_at_k(ranks, 5)?,
            r10: recall_at_k(ranks, 10)?,
            medr: median_rank(ranks)?,
            n: ranks.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
    pub medr: f64,
}

/// Unweighted mean over genre rows.
pub fn macro_average(rows: &[GenreMetrics]) -> Result<MacroMetrics, RetrieveError> {
    if rows.is_empty() {
        return Err(RetrieveError::EmptyRanks);
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&GenreMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(MacroMetrics {
        r1: mean(|r| r.r1),
        r5: mean(|r| r.r5),
        r10: mean(|r| r.r10),
        medr: mean(|r| r.medr),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub direction: Direction,
    #[serde(default)]
    pub pool: PoolMode,
    pub per_genre: Vec<GenreMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
}

#[derive(Deserialize)]
struct ReportRows {
    #[serde(default)]
    direction: Direction,
    #[serde(default)]
    pool: PoolMode,
    per_genre: Vec<GenreMetrics>,
}

impl RetrievalReport {
    pub fn from_rows(direction: Direction, pool: PoolMode, per_genre: Vec<GenreMetrics>) -> Result<Self, RetrieveError> {
        let macro_avg = macro_average(&per_genre)?;
        Ok(Self {
            direction,
            pool,
            per_genre,
            macro_avg,
        })
    }

    /// Parse per-genre rows from JSON; any stored average is recomputed.
    pub fn from_json(text: &str) -> Result<Self, RetrieveError> {
        let rows: ReportRows = serde_json::from_str(text).map_err(|e| RetrieveError::Parse(e.to_string()))?;
        Self::from_rows(rows.direction, rows.pool, rows.per_genre)
    }

    pub fn load(path: &Path) -> Result<Self, RetrieveError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl fmt::Display for RetrievalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16}{:>8}{:>8}{:>8}{:>8}{:>6}", "genre", "R@1", "R@5", "R@10", "MedR", "n")?;
        for r in &self.per_genre {
            writeln!(
                f,
                "{:<16}{:>8.1}{:>8.1}{:>8.1}{:>8.1}{:>6}",
                r.genre.as_str(),
                r.r1,
                r.r5,
                r.r10,
                r.medr,
                r.n
            )?;
        }
        let m = &self.macro_avg;
        write!(f, "{:<16}{:>8.1}{:>8.1}{:>8.1}{:>8.1}", "average", m.r1, m.r5, m.r10, m.medr)
    }
}

/// Rank of each query's own item (query `i` matches candidate `i`).
pub fn ranks_for(
    queries: ArrayView2<f64>,
    candidates: ArrayView2<f64>,
    genres: &[Genre],
    pool: PoolMode,
) -> Vec<usize> {
    (0..queries.nrows())
        .into_par_iter()
        .map(|i| {
            let q = queries.row(i);
            match pool {
                PoolMode::Global => {
                    let scores = candidates.dot(&q).to_vec();
                    rank_in_scores(&scores, i)
                }
                PoolMode::PerGenre => {
                    let members: Vec<usize> = (0..candidates.nrows()).filter(|&j| genres[j] == genres[i]).collect();
                    let scores: Vec<f64> = members.iter().map(|&j| candidates.row(j).dot(&q)).collect();
                    let own = members.iter().position(|&j| j == i).expect("query is in its own genre");
                    rank_in_scores(&scores, own)
                }
            }
        })
        .collect()
}

/// Per-genre rows in registry order, skipping genres with no queries.
pub fn group_by_genre(genres: &[Genre], ranks: &[usize]) -> Result<Vec<GenreMetrics>, RetrieveError> {
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (g, &r) in genres.iter().zip(ranks) {
        let slot = Genre::ALL.iter().position(|x| x == g).expect("registered genre");
        buckets.entry(slot).or_default().push(r);
    }
    buckets
        .into_iter()
        .map(|(slot, rs)| GenreMetrics::from_ranks(Genre::ALL[slot], &rs))
        .collect()
}

/// Embed both sides of the test split and score retrieval of each pair.
pub fn evaluate(
    params: &ModelParams,
    records: &[CaptionRecord],
    text_features: &FeatureSet,
    audio_features: &FeatureSet,
    direction: Direction,
    pool: PoolMode,
) -> Result<RetrievalReport, RetrieveError> {
    if records.is_empty() {
        return Err(RetrieveError::EmptyIndex);
    }
    let ids: Vec<&str> = records.iter().map(|r| r.youtube_id.as_str()).collect();
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
        return Err(RetrieveError::DuplicateId(dup.to_string()));
    }
    let text = embed(params, feature_matrix(text_features, &ids)?.view(), Side::Text)?;
    let audio = embed(params, feature_matrix(audio_features, &ids)?.view(), Side::Audio)?;
    let genres: Vec<Genre> = records.iter().map(|r| r.genre).collect();
    let ranks = match direction {
        Direction::TextToAudio => ranks_for(text.view(), audio.view(), &genres, pool),
        Direction::AudioToText => ranks_for(audio.view(), text.view(), &genres, pool),
    };
    RetrievalReport::from_rows(direction, pool, group_by_genre(&genres, &ranks)?)
}
