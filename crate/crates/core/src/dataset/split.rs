use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{CaptionRecord, DatasetError, EvaluationRecord};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<CaptionRecord>,
    pub validation: Vec<CaptionRecord>,
    pub test: Vec<EvaluationRecord>,
}

/// Build train/validation/test.
///
/// Caption records whose id also appears in the evaluation set are dropped
/// from the training pool so the three splits stay disjoint. Validation is
/// `validation_count` records sampled without replacement from that pool
/// with [`SplitMix64`] seeded by `seed`; both train and validation keep the
/// input order.
pub fn make_split(
    records: &[CaptionRecord],
    eval_records: &[EvaluationRecord],
    validation_count: usize,
    seed: u64,
    all_2s_only: bool,
) -> Result<DatasetSplit, DatasetError> {
    let eval_ids: HashSet<&str> = eval_records
        .iter()
        .map(|r| r.base.youtube_id.as_str())
        .collect();
    let pool: Vec<&CaptionRecord> = records
        .iter()
        .filter(|r| !eval_ids.contains(r.youtube_id.as_str()))
        .collect();
    if validation_count > pool.len() {
        return Err(DatasetError::InsufficientRecords {
            requested: validation_count,
            available: pool.len(),
        });
    }

    let mut rng = SplitMix64::new(seed);
    let mut chosen = vec![false; pool.len()];
    for idx in rng.sample_indices(pool.len(), validation_count) {
        chosen[idx] = true;
    }
    let (validation, train): (Vec<_>, Vec<_>) = pool
        .into_iter()
        .zip(&chosen)
        .partition(|(_, &is_val)| is_val);

    let test = eval_records
        .iter()
        .filter(|r| !all_2s_only || r.all_2s())
        .cloned()
        .collect();

    Ok(DatasetSplit {
        train: train.into_iter().map(|(r, _)| r.clone()).collect(),
        validation: validation.into_iter().map(|(r, _)| r.clone()).collect(),
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Genre;

    fn rec(i: usize) -> CaptionRecord {
        let id = format!("id{i:09}");
        CaptionRecord {
            url: format!("https://www.youtube.com/watch?v={id}"),
            youtube_id: id,
            genre: Genre::ALL[i % 15],
            caption: format!("caption {i}"),
            sentence: format!("5. caption {i}"),
        }
    }

    fn eval(i: usize, all2: bool) -> EvaluationRecord {
        EvaluationRecord {
            base: rec(i),
            situation: 2,
            time_season: if all2 { 2 } else { 1 },
            emotion: 2,
        }
    }

    #[test]
    fn same_seed_same_split() {
        let recs: Vec<_> = (0..100).map(rec).collect();
        let a = make_split(&recs, &[], 10, 7, true).unwrap();
        let b = make_split(&recs, &[], 10, 7, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.validation.len(), 10);
        assert_eq!(a.train.len(), 90);
        let c = make_split(&recs, &[], 10, 8, true).unwrap();
        assert_ne!(a.validation, c.validation);
    }

    #[test]
    fn zero_validation_keeps_everything_in_train() {
        let recs: Vec<_> = (0..20).map(rec).collect();
        let s = make_split(&recs, &[], 0, 1, false).unwrap();
        assert!(s.validation.is_empty());
        assert_eq!(s.train, recs);
    }

    #[test]
    fn all_2s_filter_matches_published_count() {
        // 1,200 evaluated clips of which 790 scored 2 on every perspective.
        let evals: Vec<_> = (0..1200).map(|i| eval(10_000 + i, i < 790)).collect();
        let recs: Vec<_> = (0..50).map(rec).collect();
        let s = make_split(&recs, &evals, 5, 3, true).unwrap();
        assert_eq!(s.test.len(), 790);
        let s = make_split(&recs, &evals, 5, 3, false).unwrap();
        assert_eq!(s.test.len(), 1200);
    }

    #[test]
    fn evaluated_ids_leave_the_training_pool() {
        let recs: Vec<_> = (0..30).map(rec).collect();
        let evals: Vec<_> = (0..5).map(|i| eval(i, true)).collect();
        let s = make_split(&recs, &evals, 5, 11, false).unwrap();
        let train: HashSet<_> = s.train.iter().map(|r| &r.youtube_id).collect();
        let val: HashSet<_> = s.validation.iter().map(|r| &r.youtube_id).collect();
        let test: HashSet<_> = s.test.iter().map(|r| &r.base.youtube_id).collect();
        assert!(train.is_disjoint(&val));
        assert!(train.is_disjoint(&test));
        assert!(val.is_disjoint(&test));
        assert_eq!(train.len() + val.len(), 25);
    }

    #[test]
    fn too_many_validation_records() {
        let recs: Vec<_> = (0..3).map(rec).collect();
        assert!(matches!(
            make_split(&recs, &[], 4, 0, false),
            Err(DatasetError::InsufficientRecords { requested: 4, available: 3 })
        ));
    }
}
