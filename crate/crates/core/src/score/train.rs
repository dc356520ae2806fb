//! Denoising score matching for the variance-exploding scheme `σ(t) = t`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{DenseLayer, ScoreMlp};
use crate::error::{Error, Result};
use crate::rng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct DsmTrainConfig {
    /// Largest diffusion time `T`.
    pub t_max: f64,
    /// Early-stopping time `ε`; training draws `t ~ Unif[ε, T]`.
    pub t_min: f64,
    /// One epoch is `ceil(N / batch)` optimizer steps.
    pub epochs: usize,
    pub batch: usize,
    /// Cosine schedule from `lr_hi` down to `lr_lo` over all steps.
    pub lr_hi: f64,
    pub lr_lo: f64,
    pub seed: u64,
}

impl Default for DsmTrainConfig {
    fn default() -> Self {
        Self {
            t_max: 3.0,
            t_min: 1e-4,
            epochs: 1000,
            batch: 256,
            lr_hi: 1e-3,
            lr_lo: 5e-5,
            seed: 0,
        }
    }
}

impl DsmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.t_min && self.t_min < self.t_max) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < t_min < t_max, got t_min={} t_max={}",
                self.t_min, self.t_max
            )));
        }
        if self.batch == 0 {
            return Err(Error::InvalidParameter("batch must be positive".into()));
        }
        if !(self.lr_hi > 0.0 && self.lr_lo > 0.0) {
            return Err(Error::InvalidParameter("learning rates must be positive".into()));
        }
        Ok(())
    }

    fn learning_rate(&self, step: usize, total: usize) -> f64 {
        let frac = if total <= 1 {
            0.0
        } else {
            step as f64 / (total - 1) as f64
        };
        self.lr_lo + 0.5 * (self.lr_hi - self.lr_lo) * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub mlp: ScoreMlp,
    /// Mean batch loss per epoch.
    pub loss_trace: Vec<f64>,
}

/// Minimizes `E ‖s̃(x₀ + σz, σ) + z‖²` over `σ ~ Unif[ε, T]`, data `x₀` and
/// `z ~ N(0, I)`. With `s = s̃/σ` this is the σ²-weighted conditional score
/// matching loss `σ² ‖s(x, σ) + z/σ‖²`.
pub fn dsm_train(dataset: &[Vec<f64>], mlp: ScoreMlp, cfg: &DsmTrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dsm_train dataset"));
    }
    let dim = mlp.ambient_dim();
    if let Some(bad) = dataset.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "dsm_train dataset",
            expected: dim,
            actual: bad.len(),
        });
    }

    let mut mlp = mlp;
    let steps_per_epoch = dataset.len().div_ceil(cfg.batch);
    let total_steps = cfg.epochs * steps_per_epoch;
    let mut rng = rng::stream(cfg.seed, "dsm-train");
    let mut m1 = mlp.zero_grads();
    let mut m2 = mlp.zero_grads();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    let mut x = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    let mut g_out = vec![0.0; dim];

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for _ in 0..steps_per_epoch {
            let mut grads = mlp.zero_grads();
            let mut batch_loss = 0.0;
            for _ in 0..cfg.batch {
                let x0 = &dataset[rng.random_range(0..dataset.len())];
                let sigma = rng.random_range(cfg.t_min..cfg.t_max);
                for i in 0..dim {
                    z[i] = rng.sample(StandardNormal);
                    x[i] = x0[i] + sigma * z[i];
                }
                let cache = mlp.forward_cached(&x, sigma);
                let out = cache.output();
                let mut l = 0.0;
                for i in 0..dim {
                    let r = out[i] + z[i];
                    l += r * r;
                    g_out[i] = 2.0 * r / cfg.batch as f64;
                }
                batch_loss += l;
                mlp.backward(&cache, &g_out, Some(&mut grads));
            }
            batch_loss /= cfg.batch as f64;
            if !(batch_loss <= DIVERGENCE_LOSS) {
                return Err(Error::TrainingDiverged {
                    epoch,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            step += 1;
            let lr = cfg.learning_rate(step - 1, total_steps);
            adam_update(mlp.layers_mut(), &grads, &mut m1, &mut m2, lr, step);
        }
        loss_trace.push(epoch_loss / steps_per_epoch as f64);
    }
    Ok(TrainOutcome { mlp, loss_trace })
}

fn adam_update(
    params: &mut [DenseLayer],
    grads: &[DenseLayer],
    m1: &mut [DenseLayer],
    m2: &mut [DenseLayer],
    lr: f64,
    step: usize,
) {
    let c1 = 1.0 - BETA1.powi(step as i32);
    let c2 = 1.0 - BETA2.powi(step as i32);
    for (((p, g), a), b) in params.iter_mut().zip(grads).zip(m1.iter_mut()).zip(m2.iter_mut()) {
        let slices = [
            (
                p.weights.as_mut_slice(),
                g.weights.as_slice(),
                a.weights.as_mut_slice(),
                b.weights.as_mut_slice(),
            ),
            (&mut p.bias[..], &g.bias[..], &mut a.bias[..], &mut b.bias[..]),
        ];
        for (pv, gv, av, bv) in slices {
            for i in 0..pv.len() {
                let gi = gv[i];
                av[i] = BETA1 * av[i] + (1.0 - BETA1) * gi;
                bv[i] = BETA2 * bv[i] + (1.0 - BETA2) * gi * gi;
                pv[i] -= lr * (av[i] / c1) / ((bv[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}
