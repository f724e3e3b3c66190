//! Core library for a cross-modal music caption workbench.
//!
//! * [`dataset`]: caption/evaluation records, genre registry, splits.
//! * [`caption`]: five-section prompt, vision-language endpoint client, output parsing.
//! * [`humeval`]: three-perspective human evaluation scoring.
//! * [`featurize`]: hashed text features, log-mel audio statistics, WAV decoding.
//! * [`duoenc`]: dual projection heads trained with a symmetric contrastive loss.
//! * [`retrieve`]: exact cosine index, R@K / MedR evaluation, text search.

pub mod caption;
pub mod dataset;
pub mod duoenc;
pub mod featurize;
pub mod humeval;
pub mod retrieve;
pub mod rng;
