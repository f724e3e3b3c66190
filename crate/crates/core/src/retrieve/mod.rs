//! Exact cosine retrieval over clip embeddings, plus R@K and median-rank
//! evaluation grouped by genre.

mod index;
mod metrics;
mod report;

use ndarray::Array2;
use serde::Serialize;
use thiserror::Error;

pub use index::{build_index, feature_matrix, rank_of_correct, EmbeddingIndex, IndexEntry};
pub use metrics::{median_rank, rank_in_scores, recall_at_k};
pub use report::{
    evaluate, group_by_genre, macro_average, ranks_for, Direction, GenreMetrics, MacroMetrics, PoolMode,
    RetrievalReport,
};

use crate::dataset::Genre;
use crate::duoenc::{embed, DuoencError, ModelParams, Side};
use crate::featurize::{featurize_text, FeatureError, TextFeaturizerConfig};

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("no features for {0:?}")]
    MissingFeatures(String),
    #[error("duplicate id {0:?} in index")]
    DuplicateId(String),
    #[error("id {0:?} is not in the index")]
    UnknownId(String),
    #[error("no ranks to summarise")]
    EmptyRanks,
    #[error("index is empty")]
    EmptyIndex,
    #[error("embedding row {row} has norm {norm}, expected 1")]
    NotUnitNorm { row: usize, norm: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("report parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] DuoencError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub youtube_id: String,
    pub url: String,
    pub genre: Genre,
    pub caption: String,
    pub similarity: f64,
    pub rank: usize,
}

/// Embed a free-text query into the shared space.
pub fn embed_query(query_text: &str, params: &ModelParams, text_cfg: &TextFeaturizerConfig) -> Result<Vec<f64>, RetrieveError> {
    let fv = featurize_text("query", query_text, text_cfg)?;
    let raw = Array2::from_shape_vec((1, fv.values.len()), fv.values.iter().map(|&x| f64::from(x)).collect())
        .expect("one row");
    Ok(embed(params, raw.view(), Side::Text)?.row(0).to_vec())
}

/// Top-`k` clips for a text query, optionally restricted to one genre.
pub fn search(
    query_text: &str,
    params: &ModelParams,
    text_cfg: &TextFeaturizerConfig,
    index: &EmbeddingIndex,
    k: usize,
    genre_filter: Option<Genre>,
) -> Result<Vec<SearchResult>, RetrieveError> {
    if index.is_empty() {
        return Err(RetrieveError::EmptyIndex);
    }
    let q = ndarray::Array1::from(embed_query(query_text, params, text_cfg)?);
    let scores = index.scores(q.view())?;
    let mut order: Vec<usize> = (0..index.len())
        .filter(|&i| genre_filter.is_none_or(|g| index.entries()[i].genre == g))
        .collect();
    // Stable sort keeps index order among equal scores.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(pos, i)| {
            let e = &index.entries()[i];
            SearchResult {
                youtube_id: e.youtube_id.clone(),
                url: e.url.clone(),
                genre: e.genre,
                caption: e.caption.clone(),
                similarity: scores[i],
                rank: pos + 1,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duoenc::ModelDims;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn entry(i: usize, genre: Genre) -> IndexEntry {
        IndexEntry {
            youtube_id: format!("vid{i:08}"),
            url: format!("https://www.youtube.com/watch?v=vid{i:08}"),
            genre,
            caption: format!("clip {i}"),
        }
    }

    fn toy(n: usize) -> (ModelParams, TextFeaturizerConfig, EmbeddingIndex) {
        let cfg = TextFeaturizerConfig { dim: 64, ..Default::default() };
        let params = ModelParams::init(ModelDims { text_dim: 64, audio_dim: 4, embed_dim: 3, hidden_dim: 0 }, 2);
        let mut rng = SplitMix64::new(3);
        let genres = [Genre::Jazz, Genre::Pop, Genre::Rock];
        let entries: Vec<_> = (0..n).map(|i| entry(i, genres[i % 3])).collect();
        let m = index::l2_normalize_rows(Array2::from_shape_fn((n, 3), |_| rng.normal()));
        (params, cfg, EmbeddingIndex::new(entries, m, "toy").unwrap())
    }

    #[test]
    fn k_beyond_size_returns_everything_sorted() {
        let (p, cfg, idx) = toy(7);
        let res = search("warm piano at night", &p, &cfg, &idx, 50, None).unwrap();
        assert_eq!(res.len(), 7);
        assert!(res.windows(2).all(|w| w[0].similarity >= w[1].similarity));
        assert_eq!(res.iter().map(|r| r.rank).collect::<Vec<_>>(), (1..=7).collect::<Vec<_>>());
    }

    #[test]
    fn genre_filter_restricts_results() {
        let (p, cfg, idx) = toy(12);
        let res = search("summer", &p, &cfg, &idx, 10, Some(Genre::Jazz)).unwrap();
        assert_eq!(res.len(), 4);
        assert!(res.iter().all(|r| r.genre == Genre::Jazz));
    }

    #[test]
    fn empty_index() {
        let (p, cfg, _) = toy(1);
        let idx = EmbeddingIndex::new(vec![], Array2::zeros((0, 3)), "").unwrap();
        assert!(matches!(search("x", &p, &cfg, &idx, 3, None), Err(RetrieveError::EmptyIndex)));
    }

    proptest! {
        #[test]
        fn positive_rescaling_keeps_ranks(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let mut rng = SplitMix64::new(seed);
            let n = 2 + rng.below(30) as usize;
            let q = Array2::from_shape_fn((n, 4), |_| rng.normal());
            let c = Array2::from_shape_fn((n, 4), |_| rng.normal());
            let genres = vec![Genre::Pop; n];
            let base = ranks_for(
                index::l2_normalize_rows(q.clone()).view(),
                index::l2_normalize_rows(c.clone()).view(),
                &genres,
                PoolMode::Global,
            );
            let scaled = ranks_for(
                index::l2_normalize_rows(q * scale).view(),
                index::l2_normalize_rows(c * (1.0 / scale)).view(),
                &genres,
                PoolMode::Global,
            );
            prop_assert_eq!(base, scaled);
        }
    }
}
