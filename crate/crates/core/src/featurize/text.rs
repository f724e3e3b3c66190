use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureVector};
use crate::rng::{fnv1a64, mix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfWeighting {
    Raw,
    Log1p,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextFeaturizerConfig {
    pub dim: usize,
    pub hash_seed: u64,
    pub tf_weighting: TfWeighting,
    pub lowercase: bool,
}

impl Default for TextFeaturizerConfig {
    fn default() -> Self {
        Self {
            dim: 4096,
            hash_seed: 0x6d75_7363_6170,
            tf_weighting: TfWeighting::Log1p,
            lowercase: true,
        }
    }
}

impl TextFeaturizerConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.dim < 64 || !self.dim.is_power_of_two() {
            return Err(FeatureError::InvalidConfig(format!(
                "text dim {} must be a power of two >= 64",
                self.dim
            )));
        }
        Ok(())
    }
}

/// Lowercase (optionally), drop punctuation, split on whitespace.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned
        .split_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

/// Bucket index and ±1 sign of a token: FNV-1a of the UTF-8 bytes, xored with
/// the seed and passed through the SplitMix64 finaliser. Low bits pick the
/// bucket, the top bit the sign.
pub fn token_bucket(token: &str, cfg: &TextFeaturizerConfig) -> (usize, f64) {
    let h = mix64(fnv1a64(token.as_bytes()) ^ cfg.hash_seed);
    let bucket = (h as usize) & (cfg.dim - 1);
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

/// Signed hashed bag-of-words.
pub fn featurize_text(
    source_id: &str,
    text: &str,
    cfg: &TextFeaturizerConfig,
) -> Result<FeatureVector, FeatureError> {
    cfg.validate()?;
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for t in tokenize(text, cfg.lowercase) {
        *counts.entry(t).or_default() += 1;
    }
    let mut values = vec![0.0; cfg.dim];
    for (token, count) in &counts {
        let (bucket, sign) = token_bucket(token, cfg);
        let weight = match cfg.tf_weighting {
            TfWeighting::Raw => f64::from(*count),
            TfWeighting::Log1p => f64::from(*count).ln_1p(),
        };
        values[bucket] += sign * weight;
    }
    Ok(FeatureVector::new(source_id, values.into_iter().map(|x| x as f32).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw_cfg() -> TextFeaturizerConfig {
        TextFeaturizerConfig {
            tf_weighting: TfWeighting::Raw,
            ..Default::default()
        }
    }

    #[test]
    fn empty_text_is_zero() {
        let v = featurize_text("x", "", &raw_cfg()).unwrap();
        assert_eq!(v.dim(), 4096);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn repeated_token_counts_twice() {
        let cfg = raw_cfg();
        let v = featurize_text("x", "calm calm", &cfg).unwrap();
        let (bucket, sign) = token_bucket("calm", &cfg);
        assert_eq!(f64::from(v.values[bucket]), 2.0 * sign);
        assert_eq!(v.values.iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn punctuation_and_case_are_folded() {
        let cfg = raw_cfg();
        let a = featurize_text("a", "Calm, calm!", &cfg).unwrap();
        let b = featurize_text("b", "calm calm", &cfg).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn hash_is_stable_across_builds() {
        // Frozen: changing the hash breaks every stored feature file.
        let cfg = TextFeaturizerConfig::default();
        let expected = mix64(fnv1a64(b"calm") ^ cfg.hash_seed);
        assert_eq!(token_bucket("calm", &cfg).0, (expected & 4095) as usize);
    }

    #[test]
    fn rejects_bad_dims() {
        for dim in [0, 32, 100, 4095] {
            let cfg = TextFeaturizerConfig { dim, ..Default::default() };
            assert!(featurize_text("x", "a", &cfg).is_err());
        }
    }

    proptest! {
        #[test]
        fn word_order_does_not_matter(words in prop::collection::vec("[a-z]{1,6}", 0..20), seed in any::<u64>()) {
            let cfg = TextFeaturizerConfig { dim: 256, ..Default::default() };
            let mut shuffled = words.clone();
            crate::rng::SplitMix64::new(seed).shuffle(&mut shuffled);
            let a = featurize_text("a", &words.join(" "), &cfg).unwrap();
            let b = featurize_text("b", &shuffled.join(" "), &cfg).unwrap();
            prop_assert_eq!(a.values, b.values);
        }

        #[test]
        fn always_finite(text in ".{0,200}") {
            let v = featurize_text("x", &text, &TextFeaturizerConfig::default()).unwrap();
            prop_assert!(v.values.iter().all(|x| x.is_finite()));
        }
    }
}
