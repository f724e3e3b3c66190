use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::loss::{gradients, mean_loss, Batch};
use super::model::{ModelDims, ModelParams};
use super::optim::{Optimizer, OptimizerConfig};
use super::DuoencError;
use crate::featurize::FeatureSet;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub embed_dim: usize,
    /// 0 disables the hidden layer.
    pub hidden_dim: usize,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 10,
            learning_rate: 1e-3,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            embed_dim: 128,
            hidden_dim: 512,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DuoencError> {
        let bad = |m: String| Err(DuoencError::InvalidConfig(m));
        if self.batch_size < 2 {
            return bad(format!("batch_size {} < 2", self.batch_size));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate {} must be finite and non-negative", self.learning_rate));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay {} must be finite and non-negative", self.weight_decay));
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive".into());
        }
        Ok(())
    }
}

/// Row-aligned text and audio features for a set of clips.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedFeatures {
    pub ids: Vec<String>,
    pub text: Array2<f64>,
    pub audio: Array2<f64>,
}

fn gather(set: &FeatureSet, ids: &[String]) -> Result<Array2<f64>, DuoencError> {
    let mut m = Array2::zeros((ids.len(), set.dim()));
    for (mut row, id) in m.rows_mut().into_iter().zip(ids) {
        let v = set.get(id).ok_or_else(|| DuoencError::MissingFeatures(id.clone()))?;
        row.iter_mut().zip(v).for_each(|(r, &x)| *r = f64::from(x));
    }
    Ok(m)
}

impl PairedFeatures {
    pub fn new(ids: Vec<String>, text: Array2<f64>, audio: Array2<f64>) -> Result<Self, DuoencError> {
        if text.nrows() != ids.len() || audio.nrows() != ids.len() {
            return Err(DuoencError::InvalidBatch(format!(
                "{} ids, {} text rows, {} audio rows",
                ids.len(),
                text.nrows(),
                audio.nrows()
            )));
        }
        Ok(Self { ids, text, audio })
    }

    /// Look every id up in both feature sets.
    pub fn from_sets(ids: &[String], text: &FeatureSet, audio: &FeatureSet) -> Result<Self, DuoencError> {
        Self::new(ids.to_vec(), gather(text, ids)?, gather(audio, ids)?)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn batch(&self, rows: &[usize]) -> Batch {
        Batch {
            text_features: self.text.select(Axis(0), rows),
            audio_features: self.audio.select(Axis(0), rows),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<LossRecord>,
    /// Mean validation loss after each epoch (empty without a validation set).
    pub validation: Vec<LossRecord>,
}

/// Mini-batch training with a fresh seeded shuffle every epoch.
///
/// A trailing batch of fewer than two pairs is dropped (it has no negatives).
/// `on_epoch` sees the parameters after each epoch, e.g. to checkpoint them.
pub fn train(
    data: &PairedFeatures,
    validation: Option<&PairedFeatures>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &ModelParams) -> Result<(), DuoencError>,
) -> Result<TrainOutcome, DuoencError> {
    cfg.validate()?;
    if data.len() < cfg.batch_size {
        return Err(DuoencError::InsufficientData {
            needed: cfg.batch_size,
            available: data.len(),
        });
    }
    let dims = ModelDims {
        text_dim: data.text.ncols(),
        audio_dim: data.audio.ncols(),
        embed_dim: cfg.embed_dim,
        hidden_dim: cfg.hidden_dim,
    };
    let mut params = ModelParams::init(dims, cfg.seed);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.weight_decay, &params);
    let mut shuffler = SplitMix64::for_subsystem(cfg.seed, "duoenc.shuffle");
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();
    let mut val_history = Vec::new();
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        shuffler.shuffle(&mut order);
        for rows in order.chunks(cfg.batch_size).filter(|c| c.len() >= 2) {
            let batch = data.batch(rows);
            let (loss, grads) = gradients(&params, &batch)?;
            optimizer.step(&mut params, &grads);
            if !params.is_finite() {
                return Err(DuoencError::NonFiniteLoss(f64::NAN));
            }
            history.push(LossRecord { step, epoch, loss });
            step += 1;
        }
        if let Some(val) = validation.filter(|v| v.len() >= 2) {
            let loss = mean_loss(&params, val.text.view(), val.audio.view(), cfg.batch_size)?;
            val_history.push(LossRecord { step, epoch, loss });
            tracing::info!(epoch, validation_loss = loss, "epoch finished");
        }
        on_epoch(epoch, &params)?;
    }
    Ok(TrainOutcome {
        params,
        history,
        validation: val_history,
    })
}

/// `step,epoch,loss` with a header row.
pub fn write_loss_csv(path: &Path, history: &[LossRecord]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "step,epoch,loss")?;
    for r in history {
        writeln!(w, "{},{},{}", r.step, r.epoch, r.loss)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aligned(n: usize, dim: usize, seed: u64) -> PairedFeatures {
        let mut rng = SplitMix64::new(seed);
        let x = Array2::from_shape_fn((n, dim), |_| rng.normal());
        PairedFeatures::new((0..n).map(|i| format!("p{i}")).collect(), x.clone(), x).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            epochs: 3,
            learning_rate: 1e-2,
            embed_dim: 4,
            hidden_dim: 0,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_history() {
        let data = aligned(32, 6, 1);
        let a = train(&data, None, &small_cfg(), |_, _| Ok(())).unwrap();
        let b = train(&data, None, &small_cfg(), |_, _| Ok(())).unwrap();
        let bits = |h: &[LossRecord]| h.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.history), bits(&b.history));
        assert_eq!(a.params, b.params);
        assert_eq!(a.history.len(), 3 * 4);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let data = aligned(16, 6, 2);
        let cfg = TrainConfig { learning_rate: 0.0, batch_size: 16, ..small_cfg() };
        let out = train(&data, None, &cfg, |_, _| Ok(())).unwrap();
        assert_eq!(out.params, ModelParams::init(out.params.dims(), cfg.seed));
        // Full-batch epochs see the same pairs, so the loss only moves by rounding.
        let first = out.history[0].loss;
        assert!(out.history.iter().all(|r| (r.loss - first).abs() < 1e-12));
    }

    #[test]
    fn too_little_data() {
        let data = aligned(4, 3, 2);
        assert!(matches!(
            train(&data, None, &small_cfg(), |_, _| Ok(())),
            Err(DuoencError::InsufficientData { needed: 8, available: 4 })
        ));
    }

    #[test]
    fn loss_goes_down_and_epochs_are_reported() {
        let data = aligned(32, 6, 3);
        let val = aligned(8, 6, 4);
        let mut seen = Vec::new();
        let cfg = TrainConfig { epochs: 30, ..small_cfg() };
        let out = train(&data, Some(&val), &cfg, |e, _| {
            seen.push(e);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, (0..30).collect::<Vec<_>>());
        assert_eq!(out.validation.len(), 30);
        let first: f64 = out.history[..4].iter().map(|r| r.loss).sum();
        let last: f64 = out.history[out.history.len() - 4..].iter().map(|r| r.loss).sum();
        assert!(last < first);
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loss.csv");
        write_loss_csv(&p, &[LossRecord { step: 0, epoch: 0, loss: 1.5 }]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "step,epoch,loss\n0,0,1.5\n");
    }
}
