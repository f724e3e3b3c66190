//! Human evaluation of captions on three non-musical perspectives.
//!
//! Each evaluator scores every caption 0 (negative), 1 (neutral) or 2
//! (positive) for situation, time/season and emotion. Per item and
//! perspective the score is averaged over evaluators and the averages are
//! summed over items; the "All 2s" count is the mean over evaluators of how
//! many items that evaluator scored 2 on all three perspectives.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_jsonl, DatasetError};
use crate::rng::{fnv1a64, mix64, SplitMix64};

#[derive(Debug, Error)]
pub enum HumevalError {
    #[error("score {0} outside {{0,1,2}}")]
    OutOfRange(u8),
    #[error("item {item:?} has no rating from evaluator {evaluator:?}")]
    IncompleteRatings { item: String, evaluator: String },
    #[error("item {item:?} rated twice by evaluator {evaluator:?}")]
    DuplicateRating { item: String, evaluator: String },
    #[error("no ratings for method {0}")]
    NoRatings(Method),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Caption source being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Human-written reference captions.
    Musiccaps,
    /// Text-only LLM fed with music tags.
    GptBaseline,
    /// Thumbnail-driven vision-language captions.
    Proposed,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Musiccaps, Method::GptBaseline, Method::Proposed];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Musiccaps => "musiccaps",
            Method::GptBaseline => "gpt_baseline",
            Method::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreLabel {
    Positive,
    Neutral,
    Negative,
}

pub fn score_label(score: u8) -> Result<ScoreLabel, HumevalError> {
    match score {
        2 => Ok(ScoreLabel::Positive),
        1 => Ok(ScoreLabel::Neutral),
        0 => Ok(ScoreLabel::Negative),
        s => Err(HumevalError::OutOfRange(s)),
    }
}

/// One evaluator's scores for one caption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub item_id: String,
    pub method: Method,
    pub evaluator_id: String,
    pub situation: u8,
    pub time_season: u8,
    pub emotion: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl Rating {
    pub fn validate(&self) -> Result<(), HumevalError> {
        for s in [self.situation, self.time_season, self.emotion] {
            score_label(s)?;
        }
        Ok(())
    }

    pub fn all_2s(&self) -> bool {
        self.situation == 2 && self.time_season == 2 && self.emotion == 2
    }
}

/// Per-method totals in the shape of the published comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub items: usize,
    pub evaluators: usize,
    pub situation_total: f64,
    pub time_season_total: f64,
    pub emotion_total: f64,
    pub total: f64,
    pub all_2s_count: f64,
}

/// Aggregate one method. The rating matrix must be fully crossed:
/// every evaluator seen for the method must have rated every item.
pub fn aggregate(ratings: &[Rating], method: Method) -> Result<MethodReport, HumevalError> {
    let mut cells: HashMap<(&str, &str), &Rating> = HashMap::new();
    let mut items = BTreeSet::new();
    let mut evaluators = BTreeSet::new();
    for r in ratings.iter().filter(|r| r.method == method) {
        r.validate()?;
        items.insert(r.item_id.as_str());
        evaluators.insert(r.evaluator_id.as_str());
        if cells.insert((&r.item_id, &r.evaluator_id), r).is_some() {
            return Err(HumevalError::DuplicateRating {
                item: r.item_id.clone(),
                evaluator: r.evaluator_id.clone(),
            });
        }
    }
    if evaluators.is_empty() {
        return Err(HumevalError::NoRatings(method));
    }
    for item in &items {
        for ev in &evaluators {
            if !cells.contains_key(&(*item, *ev)) {
                return Err(HumevalError::IncompleteRatings {
                    item: item.to_string(),
                    evaluator: ev.to_string(),
                });
            }
        }
    }

    // Integer sums divided once by E keep every value an exact multiple of 1/E.
    let (mut sit, mut time, mut emo, mut all2) = (0u64, 0u64, 0u64, 0u64);
    for r in cells.values() {
        sit += u64::from(r.situation);
        time += u64::from(r.time_season);
        emo += u64::from(r.emotion);
        all2 += u64::from(r.all_2s());
    }
    let e = evaluators.len() as f64;
    let (situation_total, time_season_total, emotion_total) =
        (sit as f64 / e, time as f64 / e, emo as f64 / e);
    Ok(MethodReport {
        method,
        items: items.len(),
        evaluators: evaluators.len(),
        situation_total,
        time_season_total,
        emotion_total,
        total: situation_total + time_season_total + emotion_total,
        all_2s_count: all2 as f64 / e,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumevalReport {
    pub methods: Vec<MethodReport>,
}

/// Aggregate every method present in `ratings`, in [`Method::ALL`] order.
pub fn report(ratings: &[Rating]) -> Result<HumevalReport, HumevalError> {
    let present: BTreeSet<Method> = ratings.iter().map(|r| r.method).collect();
    let methods = Method::ALL
        .iter()
        .filter(|m| present.contains(m))
        .map(|m| aggregate(ratings, *m))
        .collect::<Result<_, _>>()?;
    Ok(HumevalReport { methods })
}

impl fmt::Display for HumevalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<14}", "")?;
        for m in &self.methods {
            write!(f, "{:>14}", m.method.as_str())?;
        }
        writeln!(f)?;
        let rows: [(&str, fn(&MethodReport) -> f64); 5] = [
            ("Situation", |m| m.situation_total),
            ("Time/Season", |m| m.time_season_total),
            ("Emotion", |m| m.emotion_total),
            ("Total", |m| m.total),
            ("All 2s count", |m| m.all_2s_count),
        ];
        for (label, get) in rows {
            write!(f, "{label:<14}")?;
            for m in &self.methods {
                write!(f, "{:>14.1}", get(m))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Seeded presentation order of `methods` for one item.
///
/// The permutation depends only on `(item_id, seed)`, so a session can be
/// replayed exactly.
pub fn presentation_order(item_id: &str, methods: &[Method], seed: u64) -> Vec<Method> {
    let mut order = methods.to_vec();
    let mut rng = SplitMix64::new(mix64(seed ^ fnv1a64(item_id.as_bytes())));
    rng.shuffle(&mut order);
    order
}

pub fn load_ratings(path: &Path) -> Result<Vec<Rating>, HumevalError> {
    let rows: Vec<(usize, Rating)> = read_jsonl(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        if let Err(HumevalError::OutOfRange(s)) = r.validate() {
            return Err(DatasetError::InvariantViolation {
                line,
                field: "score",
                reason: format!("score {s} outside {{0,1,2}}"),
            }
            .into());
        }
        out.push(r);
    }
    Ok(out)
}

/// Append one JSON line with a single write call.
pub fn append_jsonl<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)
}

/// One evaluation item: a clip and the caption each method produced for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumevalItem {
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub youtube_id: Option<String>,
    pub captions: BTreeMap<Method, String>,
}

/// Read evaluation items; every item must carry a non-empty caption for
/// each method and item ids must be unique.
pub fn load_items(path: &Path) -> Result<Vec<HumevalItem>, HumevalError> {
    let rows: Vec<(usize, HumevalItem)> = read_jsonl(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, item) in rows {
        let violation = |field: &'static str, reason: String| -> HumevalError {
            DatasetError::InvariantViolation { line, field, reason }.into()
        };
        if !seen.insert(item.item_id.clone()) {
            return Err(violation("item_id", format!("duplicate item {:?}", item.item_id)));
        }
        for m in Method::ALL {
            if item.captions.get(&m).is_none_or(|c| c.trim().is_empty()) {
                return Err(violation("captions", format!("no {} caption", m.as_str())));
            }
        }
        out.push(item);
    }
    Ok(out)
}

/// Per-method count of ratings, keyed by method name (for quick summaries).
pub fn ratings_per_method(ratings: &[Rating]) -> BTreeMap<Method, usize> {
    let mut m = BTreeMap::new();
    for r in ratings {
        *m.entry(r.method).or_default() += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn items_need_all_three_captions() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("items.jsonl");
        let good = r#"{"item_id":"i1","captions":{"musiccaps":"a","gpt_baseline":"b","proposed":"c"}}"#;
        std::fs::write(&p, format!("{good}\n")).unwrap();
        let items = load_items(&p).unwrap();
        assert_eq!(items[0].captions[&Method::GptBaseline], "b");
        std::fs::write(&p, r#"{"item_id":"i1","captions":{"musiccaps":"a","proposed":"c"}}"#).unwrap();
        assert!(load_items(&p).is_err());
        std::fs::write(&p, format!("{good}\n{good}\n")).unwrap();
        assert!(load_items(&p).is_err());
    }

    fn rating(item: usize, method: Method, ev: &str, s: (u8, u8, u8)) -> Rating {
        Rating {
            item_id: format!("item{item:02}"),
            method,
            evaluator_id: ev.to_string(),
            situation: s.0,
            time_season: s.1,
            emotion: s.2,
            timestamp: None,
        }
    }

    #[test]
    fn labels() {
        assert_eq!(score_label(2).unwrap(), ScoreLabel::Positive);
        assert_eq!(score_label(1).unwrap(), ScoreLabel::Neutral);
        assert_eq!(score_label(0).unwrap(), ScoreLabel::Negative);
        assert!(matches!(score_label(3), Err(HumevalError::OutOfRange(3))));
    }

    #[test]
    fn all_twos_is_the_maximum() {
        let ratings: Vec<_> = (0..50)
            .flat_map(|i| ["e1", "e2"].map(|e| rating(i, Method::Proposed, e, (2, 2, 2))))
            .collect();
        let r = aggregate(&ratings, Method::Proposed).unwrap();
        assert_eq!(
            (r.situation_total, r.time_season_total, r.emotion_total, r.total, r.all_2s_count),
            (100.0, 100.0, 100.0, 300.0, 50.0)
        );
    }

    #[test]
    fn single_rating() {
        let r = aggregate(&[rating(0, Method::Musiccaps, "e", (2, 1, 0))], Method::Musiccaps).unwrap();
        assert_eq!((r.situation_total, r.time_season_total, r.emotion_total), (2.0, 1.0, 0.0));
        assert_eq!(r.total, 3.0);
        assert_eq!(r.all_2s_count, 0.0);
    }

    #[test]
    fn missing_cell_is_an_error() {
        let ratings = vec![
            rating(0, Method::Proposed, "e1", (1, 1, 1)),
            rating(0, Method::Proposed, "e2", (1, 1, 1)),
            rating(1, Method::Proposed, "e1", (1, 1, 1)),
        ];
        assert!(matches!(
            aggregate(&ratings, Method::Proposed),
            Err(HumevalError::IncompleteRatings { item, evaluator }) if item == "item01" && evaluator == "e2"
        ));
    }

    #[test]
    fn order_is_reproducible() {
        let a = presentation_order("item07", &Method::ALL, 42);
        assert_eq!(a, presentation_order("item07", &Method::ALL, 42));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, Method::ALL.to_vec());
    }

    #[test]
    fn order_is_close_to_uniform() {
        // 6,000 seeds over the 3! orders: every order within 5% of 1,000.
        let mut counts: HashMap<Vec<Method>, usize> = HashMap::new();
        for seed in 0..6000 {
            *counts.entry(presentation_order("item-uniformity", &Method::ALL, seed)).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for (perm, c) in &counts {
            assert!((950..=1050).contains(c), "{perm:?} appeared {c} times");
        }
    }

    fn arb_ratings() -> impl Strategy<Value = Vec<Rating>> {
        (1usize..6, 1usize..4).prop_flat_map(|(items, evals)| {
            prop::collection::vec((0u8..3, 0u8..3, 0u8..3), items * evals).prop_map(move |scores| {
                let mut out = Vec::new();
                for i in 0..items {
                    for e in 0..evals {
                        let s = scores[i * evals + e];
                        out.push(rating(i, Method::Proposed, &format!("e{e}"), s));
                    }
                }
                out
            })
        })
    }

    proptest! {
        #[test]
        fn aggregate_invariants(ratings in arb_ratings(), seed in any::<u64>()) {
            let r = aggregate(&ratings, Method::Proposed).unwrap();
            prop_assert_eq!(r.total, r.situation_total + r.time_season_total + r.emotion_total);
            for v in [r.situation_total, r.time_season_total, r.emotion_total] {
                prop_assert!(v <= 2.0 * r.items as f64);
            }
            prop_assert!(r.all_2s_count <= r.items as f64);
            let e = r.evaluators as f64;
            for v in [r.situation_total, r.time_season_total, r.emotion_total, r.total, r.all_2s_count] {
                prop_assert!((v * e - (v * e).round()).abs() < 1e-9);
            }
            // Never more all-2s items than items that anyone scored 2 on each perspective.
            let twos = |f: fn(&Rating) -> u8| ratings.iter().filter(|x| f(x) == 2).map(|x| &x.item_id).collect::<BTreeSet<_>>().len() as f64;
            let bound = twos(|x| x.situation).min(twos(|x| x.time_season)).min(twos(|x| x.emotion));
            prop_assert!(r.all_2s_count <= bound);

            let mut shuffled = ratings.clone();
            SplitMix64::new(seed).shuffle(&mut shuffled);
            prop_assert_eq!(aggregate(&shuffled, Method::Proposed).unwrap(), r);
        }
    }
}
