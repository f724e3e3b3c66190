use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::DuoencError;
use crate::rng::SplitMix64;

/// Guard below which a pre-normalisation row is treated as zero.
pub const NORM_EPS: f64 = 1e-12;
pub const MIN_LOG_TEMPERATURE: f64 = 0.0; // ln 1
pub const MAX_LOG_TEMPERATURE: f64 = 4.605_170_185_988_092; // ln 100

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Text,
    Audio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub text_dim: usize,
    pub audio_dim: usize,
    pub embed_dim: usize,
    /// 0 means no hidden layer.
    pub hidden_dim: usize,
}

/// Fully connected layer `y = W x + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn init(out: usize, inp: usize, rng: &mut SplitMix64) -> Self {
        let scale = (1.0 / inp.max(1) as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((out, inp), |_| rng.normal() * scale),
            bias: Array1::zeros(out),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

/// One side's projection: optional tanh hidden layer, then a linear map to
/// the shared embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub hidden: Option<Dense>,
    pub out: Dense,
}

impl Head {
    fn init(in_dim: usize, hidden_dim: usize, embed_dim: usize, rng: &mut SplitMix64) -> Self {
        if hidden_dim == 0 {
            Self {
                hidden: None,
                out: Dense::init(embed_dim, in_dim, rng),
            }
        } else {
            Self {
                hidden: Some(Dense::init(hidden_dim, in_dim, rng)),
                out: Dense::init(embed_dim, hidden_dim, rng),
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.as_ref().unwrap_or(&self.out).weight.ncols()
    }

    fn zeros_like(&self) -> Self {
        Self {
            hidden: self.hidden.as_ref().map(Dense::zeros_like),
            out: self.out.zeros_like(),
        }
    }

    pub(crate) fn forward(&self, x: ArrayView2<f64>) -> HeadCache {
        let hidden = self.hidden.as_ref().map(|h| h.forward(&x).mapv(f64::tanh));
        let pre = match &hidden {
            Some(h) => self.out.forward(&h.view()),
            None => self.out.forward(&x),
        };
        let norms: Array1<f64> = pre.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        let mut emb = pre;
        for (mut row, &n) in emb.rows_mut().into_iter().zip(&norms) {
            if n < NORM_EPS {
                row.fill(0.0);
                row[0] = 1.0;
            } else {
                row /= n;
            }
        }
        HeadCache {
            input: x.to_owned(),
            hidden,
            norms,
            emb,
        }
    }
}

pub(crate) struct HeadCache {
    pub input: Array2<f64>,
    pub hidden: Option<Array2<f64>>,
    pub norms: Array1<f64>,
    pub emb: Array2<f64>,
}

/// Both projection heads plus the learnable log logit-scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub text: Head,
    pub audio: Head,
    pub log_temperature: f64,
}

/// What a parameter block is, for weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Weight,
    Bias,
    LogTemperature,
}

impl ModelParams {
    /// Gaussian weights with variance `1 / fan_in`, zero biases and a logit
    /// scale of `1 / 0.07`.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut rng = SplitMix64::for_subsystem(seed, "duoenc.init");
        let text = Head::init(dims.text_dim, dims.hidden_dim, dims.embed_dim, &mut rng);
        let audio = Head::init(dims.audio_dim, dims.hidden_dim, dims.embed_dim, &mut rng);
        Self {
            text,
            audio,
            log_temperature: (1.0f64 / 0.07).ln(),
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            text_dim: self.text.input_dim(),
            audio_dim: self.audio.input_dim(),
            embed_dim: self.text.out.weight.nrows(),
            hidden_dim: self.text.hidden.as_ref().map_or(0, |h| h.weight.nrows()),
        }
    }

    pub fn head(&self, side: Side) -> &Head {
        match side {
            Side::Text => &self.text,
            Side::Audio => &self.audio,
        }
    }

    pub fn logit_scale(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn clamp_temperature(&mut self) {
        self.log_temperature = self
            .log_temperature
            .clamp(MIN_LOG_TEMPERATURE, MAX_LOG_TEMPERATURE);
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            text: self.text.zeros_like(),
            audio: self.audio.zeros_like(),
            log_temperature: 0.0,
        }
    }

    /// Parameter blocks in serialisation order: text head (hidden weight,
    /// hidden bias, output weight, output bias), audio head likewise, then
    /// the log temperature.
    pub fn blocks(&self) -> Vec<(BlockKind, &[f64])> {
        let mut out = Vec::with_capacity(9);
        for head in [&self.text, &self.audio] {
            for layer in head.hidden.iter().chain(std::iter::once(&head.out)) {
                out.push((BlockKind::Weight, layer.weight.as_slice().expect("standard layout")));
                out.push((BlockKind::Bias, layer.bias.as_slice().expect("standard layout")));
            }
        }
        out.push((BlockKind::LogTemperature, std::slice::from_ref(&self.log_temperature)));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(BlockKind, &mut [f64])> {
        let mut out = Vec::with_capacity(9);
        for head in [&mut self.text, &mut self.audio] {
            for layer in head.hidden.iter_mut().chain(std::iter::once(&mut head.out)) {
                out.push((BlockKind::Weight, layer.weight.as_slice_mut().expect("standard layout")));
                out.push((BlockKind::Bias, layer.bias.as_slice_mut().expect("standard layout")));
            }
        }
        out.push((BlockKind::LogTemperature, std::slice::from_mut(&mut self.log_temperature)));
        out
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().into_iter().flat_map(|(_, b)| b.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut offset = 0;
        for (_, block) in self.blocks_mut() {
            block.copy_from_slice(&flat[offset..offset + block.len()]);
            offset += block.len();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|x| x.is_finite()))
    }
}

/// L2-normalised embeddings of `features` (one row per item).
pub fn embed(params: &ModelParams, features: ArrayView2<f64>, side: Side) -> Result<Array2<f64>, DuoencError> {
    let head = params.head(side);
    if features.ncols() != head.input_dim() {
        return Err(DuoencError::DimensionMismatch {
            side,
            expected: head.input_dim(),
            actual: features.ncols(),
        });
    }
    Ok(head.forward(features).emb)
}
