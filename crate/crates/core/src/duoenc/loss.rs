//! Symmetric contrastive loss and its hand-derived gradient.
//!
//! With audio embeddings `a_i`, text embeddings `t_j` and logit scale
//! `s = exp(log_temperature)`, the logits are `S_ij = s * <a_i, t_j>` and
//!
//! ```text
//! L = 1/2 * ( mean_i CE(S_i., i) + mean_j CE(S_.j, j) )
//! dL/dS = 1/(2N) * ( softmax_rows(S) - I + softmax_cols(S) - I )
//! ```
//!
//! The backward pass then runs through the logit scale, the L2
//! normalisation (`dz = (de - e <e, de>) / |z|`), the output layer and the
//! optional tanh hidden layer.

use ndarray::{Array2, ArrayView2, Axis};

use super::model::{Dense, Head, HeadCache, ModelParams, NORM_EPS};
use super::{DuoencError, Side};

/// Aligned text/audio feature rows: row `i` of both matrices is the same clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub text_features: Array2<f64>,
    pub audio_features: Array2<f64>,
    pub ids: Vec<String>,
}

impl Batch {
    pub fn new(text_features: Array2<f64>, audio_features: Array2<f64>, ids: Vec<String>) -> Result<Self, DuoencError> {
        let n = ids.len();
        if text_features.nrows() != n || audio_features.nrows() != n {
            return Err(DuoencError::InvalidBatch(format!(
                "{} ids, {} text rows, {} audio rows",
                n,
                text_features.nrows(),
                audio_features.nrows()
            )));
        }
        if n < 2 {
            return Err(DuoencError::InvalidBatch("a batch needs at least two pairs".into()));
        }
        Ok(Self {
            text_features,
            audio_features,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn check(&self, params: &ModelParams) -> Result<(), DuoencError> {
        for (side, feats) in [(Side::Text, &self.text_features), (Side::Audio, &self.audio_features)] {
            let expected = params.head(side).input_dim();
            if feats.ncols() != expected {
                return Err(DuoencError::DimensionMismatch {
                    side,
                    expected,
                    actual: feats.ncols(),
                });
            }
        }
        if self.len() < 2 {
            return Err(DuoencError::InvalidBatch("a batch needs at least two pairs".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// `N × N`, rows are audio queries, columns text candidates.
    pub logits: Array2<f64>,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Loss from a square logit matrix.
pub fn symmetric_cross_entropy(logits: ArrayView2<f64>) -> f64 {
    let n = logits.nrows();
    let row_ce: f64 = (0..n)
        .map(|i| log_sum_exp(logits.row(i).iter().copied()) - logits[[i, i]])
        .sum::<f64>()
        / n as f64;
    let col_ce: f64 = (0..n)
        .map(|j| log_sum_exp(logits.column(j).iter().copied()) - logits[[j, j]])
        .sum::<f64>()
        / n as f64;
    0.5 * (row_ce + col_ce)
}

struct Forward {
    text: HeadCache,
    audio: HeadCache,
    logits: Array2<f64>,
    loss: f64,
}

fn forward(params: &ModelParams, batch: &Batch) -> Result<Forward, DuoencError> {
    batch.check(params)?;
    let text = params.text.forward(batch.text_features.view());
    let audio = params.audio.forward(batch.audio_features.view());
    let logits = audio.emb.dot(&text.emb.t()) * params.logit_scale();
    let loss = symmetric_cross_entropy(logits.view());
    if !loss.is_finite() {
        return Err(DuoencError::NonFiniteLoss(loss));
    }
    Ok(Forward { text, audio, logits, loss })
}

pub fn contrastive_loss(params: &ModelParams, batch: &Batch) -> Result<LossOutput, DuoencError> {
    let f = forward(params, batch)?;
    Ok(LossOutput {
        loss: f.loss,
        logits: f.logits,
    })
}

fn softmax_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

fn dense_backward(layer: &Dense, input: &Array2<f64>, d_out: &Array2<f64>, grad: &mut Dense) -> Array2<f64> {
    grad.weight += &d_out.t().dot(input);
    grad.bias += &d_out.sum_axis(Axis(0));
    d_out.dot(&layer.weight)
}

fn head_backward(head: &Head, cache: &HeadCache, d_emb: &Array2<f64>, grad: &mut Head) {
    let mut d_pre = Array2::zeros(d_emb.raw_dim());
    for (i, mut row) in d_pre.rows_mut().into_iter().enumerate() {
        let n = cache.norms[i];
        if n < NORM_EPS {
            continue;
        }
        let e = cache.emb.row(i);
        let de = d_emb.row(i);
        let proj = e.dot(&de);
        row.assign(&((&de - &(&e * proj)) / n));
    }
    match (&head.hidden, &cache.hidden) {
        (Some(hidden), Some(h)) => {
            let grad_hidden = grad.hidden.as_mut().expect("gradient mirrors params");
            let d_h = dense_backward(&head.out, h, &d_pre, &mut grad.out);
            let d_u = d_h * &h.mapv(|v| 1.0 - v * v);
            dense_backward(hidden, &cache.input, &d_u, grad_hidden);
        }
        _ => {
            dense_backward(&head.out, &cache.input, &d_pre, &mut grad.out);
        }
    }
}

/// Loss and analytic gradient for every parameter, laid out like `params`.
pub fn gradients(params: &ModelParams, batch: &Batch) -> Result<(f64, ModelParams), DuoencError> {
    let f = forward(params, batch)?;
    let n = batch.len();
    let scale = params.logit_scale();

    let p_rows = softmax_rows(&f.logits);
    let p_cols = softmax_rows(&f.logits.t().to_owned()).reversed_axes();
    let eye = Array2::<f64>::eye(n);
    let d_logits = ((&p_rows - &eye) + (&p_cols - &eye)) * (0.5 / n as f64);

    let mut grad = params.zeros_like();
    grad.log_temperature = (&d_logits * &f.logits).sum();
    let d_audio = d_logits.dot(&f.text.emb) * scale;
    let d_text = d_logits.t().dot(&f.audio.emb) * scale;
    head_backward(&params.audio, &f.audio, &d_audio, &mut grad.audio);
    head_backward(&params.text, &f.text, &d_text, &mut grad.text);

    if !grad.is_finite() {
        return Err(DuoencError::NonFiniteGradient);
    }
    Ok((f.loss, grad))
}

/// Mean loss over consecutive chunks of at most `batch_size` rows (chunks
/// shorter than two rows are skipped).
pub fn mean_loss(
    params: &ModelParams,
    text: ArrayView2<f64>,
    audio: ArrayView2<f64>,
    batch_size: usize,
) -> Result<f64, DuoencError> {
    let n = text.nrows();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut start = 0;
    while start + 2 <= n {
        let end = (start + batch_size).min(n);
        let batch = Batch {
            text_features: text.slice(ndarray::s![start..end, ..]).to_owned(),
            audio_features: audio.slice(ndarray::s![start..end, ..]).to_owned(),
            ids: (start..end).map(|i| i.to_string()).collect(),
        };
        total += contrastive_loss(params, &batch)?.loss;
        count += 1;
        start = end;
    }
    if count == 0 {
        return Err(DuoencError::InsufficientData { needed: 2, available: n });
    }
    Ok(total / count as f64)
}

/// Logit-scale-free similarity matrix between two embedding sets.
pub fn cosine_matrix(queries: &Array2<f64>, candidates: &Array2<f64>) -> Array2<f64> {
    queries.dot(&candidates.t())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duoenc::{ModelDims, ModelParams};
    use crate::rng::SplitMix64;

    fn random_batch(n: usize, text_dim: usize, audio_dim: usize, seed: u64) -> Batch {
        let mut rng = SplitMix64::new(seed);
        Batch::new(
            Array2::from_shape_fn((n, text_dim), |_| rng.normal()),
            Array2::from_shape_fn((n, audio_dim), |_| rng.normal()),
            (0..n).map(|i| format!("c{i}")).collect(),
        )
        .unwrap()
    }

    /// Term-by-term softmax cross-entropy with no shared code.
    fn naive_loss(s: &Array2<f64>) -> f64 {
        let n = s.nrows();
        let mut rows = 0.0;
        let mut cols = 0.0;
        for i in 0..n {
            let mut denom = 0.0;
            for j in 0..n {
                denom += s[[i, j]].exp();
            }
            rows += -(s[[i, i]].exp() / denom).ln();
        }
        for j in 0..n {
            let mut denom = 0.0;
            for i in 0..n {
                denom += s[[i, j]].exp();
            }
            cols += -(s[[j, j]].exp() / denom).ln();
        }
        0.5 * (rows / n as f64 + cols / n as f64)
    }

    #[test]
    fn uniform_logits_give_ln_n() {
        for n in [2usize, 4, 16] {
            let s = Array2::from_elem((n, n), 3.7);
            assert!((symmetric_cross_entropy(s.view()) - (n as f64).ln()).abs() < 1e-12);
        }
        let s = Array2::from_elem((4, 4), 0.0);
        assert!((symmetric_cross_entropy(s.view()) - 1.3862944).abs() < 1e-7);
    }

    #[test]
    fn dominant_diagonal_goes_to_zero() {
        let s = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 50.0 / 0.07 } else { 0.0 });
        assert!(symmetric_cross_entropy(s.view()) < 1e-12);
    }

    #[test]
    fn matches_naive_cross_entropy() {
        let dims = ModelDims { text_dim: 5, audio_dim: 7, embed_dim: 3, hidden_dim: 0 };
        for seed in 0..20 {
            let p = ModelParams::init(dims, seed);
            let b = random_batch(3, 5, 7, seed + 100);
            let out = contrastive_loss(&p, &b).unwrap();
            assert!((out.loss - naive_loss(&out.logits)).abs() < 1e-10);
        }
    }

    #[test]
    fn identical_embeddings_give_ln_n() {
        let dims = ModelDims { text_dim: 3, audio_dim: 3, embed_dim: 2, hidden_dim: 0 };
        let p = ModelParams::init(dims, 1);
        let row = [0.2, -0.4, 1.0];
        let feats = Array2::from_shape_fn((4, 3), |(_, j)| row[j]);
        let b = Batch::new(feats.clone(), feats, (0..4).map(|i| i.to_string()).collect()).unwrap();
        let (loss, g) = gradients(&p, &b).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!(g.log_temperature.abs() < 1e-12);
    }

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    #[test]
    fn analytic_matches_central_differences() {
        for hidden in [0usize, 5] {
            let dims = ModelDims { text_dim: 8, audio_dim: 8, embed_dim: 4, hidden_dim: hidden };
            for seed in 0..10u64 {
                let mut p = ModelParams::init(dims, seed);
                // Off-zero biases so every coordinate carries signal.
                let mut rng = SplitMix64::new(seed ^ 0xb1a5);
                for (kind, block) in p.blocks_mut() {
                    if kind == crate::duoenc::BlockKind::Bias {
                        block.iter_mut().for_each(|b| *b = 0.1 * rng.normal());
                    }
                }
                p.log_temperature = 1.0 + rng.next_f64();
                let b = random_batch(4, 8, 8, seed + 7);
                let (_, g) = gradients(&p, &b).unwrap();
                let analytic = g.to_flat();
                let base = p.to_flat();
                let h = 1e-5;
                for k in 0..base.len() {
                    let mut plus = base.clone();
                    plus[k] += h;
                    let mut minus = base.clone();
                    minus[k] -= h;
                    let mut q = p.clone();
                    q.set_flat(&plus);
                    let lp = contrastive_loss(&q, &b).unwrap().loss;
                    q.set_flat(&minus);
                    let lm = contrastive_loss(&q, &b).unwrap().loss;
                    let numeric = (lp - lm) / (2.0 * h);
                    if analytic[k].abs() < 1e-8 && numeric.abs() < 1e-8 {
                        continue;
                    }
                    let err = relative_error(analytic[k], numeric);
                    assert!(err < 1e-4, "hidden={hidden} seed={seed} k={k}: {} vs {numeric}", analytic[k]);
                }
            }
        }
    }

    #[test]
    fn mirrored_heads_get_mirrored_gradients() {
        let dims = ModelDims { text_dim: 6, audio_dim: 6, embed_dim: 3, hidden_dim: 4 };
        let mut p = ModelParams::init(dims, 5);
        p.audio = p.text.clone();
        let mut rng = SplitMix64::new(77);
        let feats = Array2::from_shape_fn((5, 6), |_| rng.normal());
        let b = Batch::new(feats.clone(), feats, (0..5).map(|i| i.to_string()).collect()).unwrap();
        let (_, g) = gradients(&p, &b).unwrap();
        let t = g.text.out.weight.clone();
        let a = g.audio.out.weight.clone();
        assert!((&t - &a).iter().all(|d| d.abs() < 1e-12));
        let th = &g.text.hidden.as_ref().unwrap().weight;
        let ah = &g.audio.hidden.as_ref().unwrap().weight;
        assert!((th - ah).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn swapping_sides_keeps_the_loss() {
        let dims = ModelDims { text_dim: 6, audio_dim: 6, embed_dim: 3, hidden_dim: 0 };
        let p = ModelParams::init(dims, 8);
        let b = random_batch(5, 6, 6, 9);
        let swapped_params = ModelParams {
            text: p.audio.clone(),
            audio: p.text.clone(),
            log_temperature: p.log_temperature,
        };
        let swapped = Batch::new(b.audio_features.clone(), b.text_features.clone(), b.ids.clone()).unwrap();
        let l1 = contrastive_loss(&p, &b).unwrap();
        let l2 = contrastive_loss(&swapped_params, &swapped).unwrap();
        assert!((l1.loss - l2.loss).abs() < 1e-12);
        assert!((&l1.logits - &l2.logits.t()).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn single_pair_batch_is_invalid() {
        assert!(Batch::new(Array2::zeros((1, 2)), Array2::zeros((1, 2)), vec!["a".into()]).is_err());
    }
}
