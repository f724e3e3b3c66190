use serde::{Deserialize, Serialize};

use super::model::{BlockKind, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd {
        #[serde(default)]
        momentum: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

/// Stateful optimiser over the flattened parameter vector.
///
/// Weight decay is an L2 term added to the gradient of weight matrices only
/// (biases and the log temperature are not decayed). The log temperature is
/// clamped to `[ln 1, ln 100]` after every step.
pub struct Optimizer {
    config: OptimizerConfig,
    learning_rate: f64,
    weight_decay: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, learning_rate: f64, weight_decay: f64, params: &ModelParams) -> Self {
        let n = params.num_params();
        Self {
            config,
            learning_rate,
            weight_decay,
            first: vec![0.0; n],
            second: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let grad_blocks = grads.blocks();
        let mut offset = 0;
        for ((kind, block), (_, grad)) in params.blocks_mut().into_iter().zip(grad_blocks) {
            let decay = if kind == BlockKind::Weight { self.weight_decay } else { 0.0 };
            for (k, (w, g)) in block.iter_mut().zip(grad).enumerate() {
                let g = g + decay * *w;
                let idx = offset + k;
                *w -= self.learning_rate * self.direction(idx, g);
            }
            offset += block.len();
        }
        params.clamp_temperature();
    }

    fn direction(&mut self, idx: usize, g: f64) -> f64 {
        match self.config {
            OptimizerConfig::Sgd { momentum } => {
                if momentum == 0.0 {
                    return g;
                }
                let v = momentum * self.first[idx] + g;
                self.first[idx] = v;
                v
            }
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                let m = beta1 * self.first[idx] + (1.0 - beta1) * g;
                let v = beta2 * self.second[idx] + (1.0 - beta2) * g * g;
                self.first[idx] = m;
                self.second[idx] = v;
                let t = self.step as i32;
                let m_hat = m / (1.0 - beta1.powi(t));
                let v_hat = v / (1.0 - beta2.powi(t));
                m_hat / (v_hat.sqrt() + eps)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duoenc::{ModelDims, MAX_LOG_TEMPERATURE};

    fn params() -> ModelParams {
        ModelParams::init(ModelDims { text_dim: 3, audio_dim: 2, embed_dim: 2, hidden_dim: 0 }, 0)
    }

    #[test]
    fn sgd_moves_against_the_gradient() {
        let mut p = params();
        let before = p.to_flat();
        let mut g = p.zeros_like();
        g.set_flat(&vec![1.0; p.num_params()]);
        let mut opt = Optimizer::new(OptimizerConfig::Sgd { momentum: 0.0 }, 0.1, 0.0, &p);
        opt.step(&mut p, &g);
        for (a, b) in p.to_flat().iter().zip(before) {
            assert!((a - (b - 0.1)).abs() < 1e-15);
        }
    }

    #[test]
    fn first_adam_step_has_unit_size() {
        let mut p = params();
        let before = p.to_flat();
        let mut g = p.zeros_like();
        g.set_flat(&vec![0.37; p.num_params()]);
        let mut opt = Optimizer::new(OptimizerConfig::default(), 1e-3, 0.0, &p);
        opt.step(&mut p, &g);
        for (a, b) in p.to_flat().iter().zip(before) {
            assert!(((b - a) - 1e-3).abs() < 1e-9);
        }
    }

    #[test]
    fn temperature_is_clamped() {
        let mut p = params();
        let mut g = p.zeros_like();
        g.log_temperature = -1e6;
        let mut opt = Optimizer::new(OptimizerConfig::Sgd { momentum: 0.0 }, 1.0, 0.0, &p);
        opt.step(&mut p, &g);
        assert_eq!(p.log_temperature, MAX_LOG_TEMPERATURE);
        g.log_temperature = 1e6;
        opt.step(&mut p, &g);
        assert_eq!(p.log_temperature, 0.0);
    }

    #[test]
    fn weight_decay_skips_biases() {
        let mut p = params();
        p.text.out.bias.fill(1.0);
        let g = p.zeros_like();
        let w_before = p.text.out.weight.clone();
        let mut opt = Optimizer::new(OptimizerConfig::Sgd { momentum: 0.0 }, 0.5, 0.1, &p);
        opt.step(&mut p, &g);
        assert!(p.text.out.bias.iter().all(|&b| b == 1.0));
        for (a, b) in p.text.out.weight.iter().zip(w_before.iter()) {
            assert!((a - 0.95 * b).abs() < 1e-15);
        }
    }
}
