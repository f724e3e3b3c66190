use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use super::metrics::rank_in_scores;
use super::RetrieveError;
use crate::dataset::{CaptionRecord, Genre};
use crate::duoenc::{embed, ModelParams, Side};
use crate::featurize::FeatureSet;

const UNIT_TOL: f64 = 1e-6;

/// Display metadata carried alongside each indexed clip.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexEntry {
    pub youtube_id: String,
    pub url: String,
    pub genre: Genre,
    pub caption: String,
}

impl From<&CaptionRecord> for IndexEntry {
    fn from(r: &CaptionRecord) -> Self {
        Self {
            youtube_id: r.youtube_id.clone(),
            url: r.url.clone(),
            genre: r.genre,
            caption: r.caption.clone(),
        }
    }
}

/// Immutable exact-search index over unit-norm embeddings.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    entries: Vec<IndexEntry>,
    matrix: Array2<f64>,
    position: HashMap<String, usize>,
    built_from: String,
}

/// Gather raw features for `ids` in order, as `f64`.
pub fn feature_matrix(set: &FeatureSet, ids: &[&str]) -> Result<Array2<f64>, RetrieveError> {
    let mut m = Array2::zeros((ids.len(), set.dim()));
    for (mut row, id) in m.rows_mut().into_iter().zip(ids) {
        let v = set.get(id).ok_or_else(|| RetrieveError::MissingFeatures(id.to_string()))?;
        row.iter_mut().zip(v).for_each(|(r, &x)| *r = f64::from(x));
    }
    Ok(m)
}

impl EmbeddingIndex {
    pub fn new(entries: Vec<IndexEntry>, matrix: Array2<f64>, built_from: &str) -> Result<Self, RetrieveError> {
        if entries.len() != matrix.nrows() {
            return Err(RetrieveError::Shape(format!(
                "{} entries but {} embedding rows",
                entries.len(),
                matrix.nrows()
            )));
        }
        for (i, row) in matrix.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(RetrieveError::NotUnitNorm { row: i, norm });
            }
        }
        let mut position = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if position.insert(e.youtube_id.clone(), i).is_some() {
                return Err(RetrieveError::DuplicateId(e.youtube_id.clone()));
            }
        }
        Ok(Self {
            entries,
            matrix,
            position,
            built_from: built_from.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn entry(&self, id: &str) -> Option<&IndexEntry> {
        self.position.get(id).map(|&i| &self.entries[i])
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn built_from(&self) -> &str {
        &self.built_from
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.position.get(id).copied()
    }

    /// Cosine similarity of a unit query against every row.
    pub fn scores(&self, query: ArrayView1<f64>) -> Result<Vec<f64>, RetrieveError> {
        if query.len() != self.matrix.ncols() {
            return Err(RetrieveError::Shape(format!(
                "query has dimension {}, index has {}",
                query.len(),
                self.matrix.ncols()
            )));
        }
        Ok(self.matrix.dot(&query).to_vec())
    }
}

/// Embed the audio side of every record; rows follow input order.
pub fn build_index(
    params: &ModelParams,
    records: &[CaptionRecord],
    audio_features: &FeatureSet,
    built_from: &str,
) -> Result<EmbeddingIndex, RetrieveError> {
    let ids: Vec<&str> = records.iter().map(|r| r.youtube_id.as_str()).collect();
    let raw = feature_matrix(audio_features, &ids)?;
    let emb = embed(params, raw.view(), Side::Audio)?;
    EmbeddingIndex::new(records.iter().map(IndexEntry::from).collect(), emb, built_from)
}

/// Rank of `correct_id` for an already-normalised query.
pub fn rank_of_correct(query: ArrayView1<f64>, index: &EmbeddingIndex, correct_id: &str) -> Result<usize, RetrieveError> {
    let c = index
        .position(correct_id)
        .ok_or_else(|| RetrieveError::UnknownId(correct_id.to_string()))?;
    Ok(rank_in_scores(&index.scores(query)?, c))
}

#[cfg(test)]
pub(crate) fn l2_normalize_rows(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.axis_iter_mut(ndarray::Axis(0)) {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row /= n;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duoenc::ModelDims;
    use crate::featurize::FeatureVector;
    use ndarray::array;

    fn rec(id: &str, genre: Genre) -> CaptionRecord {
        CaptionRecord {
            youtube_id: id.to_string(),
            url: format!("https://www.youtube.com/watch?v={id}"),
            genre,
            caption: format!("caption {id}"),
            sentence: String::new(),
        }
    }

    fn setup(n: usize) -> (ModelParams, Vec<CaptionRecord>, FeatureSet) {
        let params = ModelParams::init(ModelDims { text_dim: 4, audio_dim: 3, embed_dim: 2, hidden_dim: 0 }, 1);
        let records: Vec<_> = (0..n).map(|i| rec(&format!("id{i:08}"), Genre::Jazz)).collect();
        let vecs: Vec<_> = records
            .iter()
            .enumerate()
            .map(|(i, r)| FeatureVector::new(&r.youtube_id, vec![i as f32, 1.0, -(i as f32)]))
            .collect();
        (params, records, FeatureSet::from_vectors(&vecs).unwrap())
    }

    #[test]
    fn builds_unit_rows_in_input_order() {
        let (p, recs, feats) = setup(10);
        let idx = build_index(&p, &recs, &feats, "ckpt").unwrap();
        assert_eq!(idx.len(), 10);
        for row in idx.matrix().rows() {
            assert!((row.dot(&row) - 1.0).abs() < 1e-12);
        }
        assert_eq!(idx.entries()[3].youtube_id, "id00000003");
        let again = build_index(&p, &recs, &feats, "ckpt").unwrap();
        assert_eq!(idx.matrix(), again.matrix());
    }

    #[test]
    fn duplicate_and_missing_ids() {
        let (p, mut recs, feats) = setup(3);
        recs.push(recs[0].clone());
        assert!(matches!(build_index(&p, &recs, &feats, ""), Err(RetrieveError::DuplicateId(_))));
        recs.pop();
        recs.push(rec("zzzzzzzzzzz", Genre::Pop));
        assert!(matches!(build_index(&p, &recs, &feats, ""), Err(RetrieveError::MissingFeatures(_))));
    }

    #[test]
    fn tie_rule_and_unknown_id() {
        let entries: Vec<_> = (0..5).map(|i| IndexEntry::from(&rec(&format!("t{i}"), Genre::Pop))).collect();
        let m = Array2::from_shape_fn((5, 2), |(_, j)| if j == 0 { 1.0 } else { 0.0 });
        let idx = EmbeddingIndex::new(entries, m, "").unwrap();
        let q = array![0.6, 0.8];
        assert_eq!(rank_of_correct(q.view(), &idx, "t3").unwrap(), 4);
        assert!(matches!(rank_of_correct(q.view(), &idx, "nope"), Err(RetrieveError::UnknownId(_))));
    }

    #[test]
    fn rejects_non_unit_rows() {
        let entries = vec![IndexEntry::from(&rec("a", Genre::Pop))];
        assert!(matches!(
            EmbeddingIndex::new(entries, array![[2.0, 0.0]], ""),
            Err(RetrieveError::NotUnitNorm { row: 0, .. })
        ));
    }
}
