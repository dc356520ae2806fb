//! Score oracles.
//!
//! Every oracle evaluates the Tweedie mean `s(x) = x + σ²∇log p_σ(x)` and its
//! Jacobian `s'(x) = I + σ²∇²log p_σ(x)`. Exact oracles (empirical measure,
//! circle quadrature, known manifold) additionally expose the link function
//! `ℓ_σ(x) = ½‖x‖² − σ² log p_σ(x)`, whose gradient is the Tweedie mean and
//! whose Hessian is the Tweedie Jacobian.

mod empirical;
mod exact;
mod mlp;
mod quadrature;
mod sampler;
mod train;

pub use empirical::EmpiricalScoreOracle;
pub use exact::ExactManifoldScore;
pub use mlp::{MlpScoreOracle, ScoreMlp, MODEL_MAGIC};
pub use quadrature::QuadratureScoreOracle;
pub use sampler::{ve_reverse_sample, VeSchedule};
pub use train::{dsm_train, DsmTrainConfig, TrainOutcome};

use crate::error::Result;
use crate::numerics::{self, Matrix};

/// Tweedie mean, Tweedie Jacobian and link value at one point.
#[derive(Debug, Clone)]
pub struct ScoreEval {
    pub tweedie_mean: Vec<f64>,
    pub tweedie_jacobian: Matrix,
    /// `ℓ_σ(x) − link_constant`; `None` when the oracle has no access to the
    /// density (trained networks).
    pub link_value: Option<f64>,
    /// Additive constant dropped from `link_value` (`−σ²(log N + (d/2) log 2πσ²)`
    /// for mixtures, zero for the exact adapter).
    pub link_constant: f64,
}

/// Local information about `s` at a point: its value and transposed
/// Jacobian–vector products, without materializing the Jacobian.
pub trait Linearization {
    fn mean(&self) -> &[f64];
    /// `s'(x)ᵀ v`.
    fn vjp(&self, v: &[f64]) -> Vec<f64>;
    fn link_value(&self) -> Option<f64>;
}

/// Uniform evaluation contract shared by all oracles.
pub trait ScoreOps: Send + Sync {
    fn ambient_dim(&self) -> usize;

    /// Short label for run metadata.
    fn kind(&self) -> String;

    fn linearize<'a>(&'a self, x: &[f64]) -> Result<Box<dyn Linearization + 'a>>;

    /// Full evaluation including the dense Jacobian.
    fn eval(&self, x: &[f64]) -> Result<ScoreEval>;

    fn mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.linearize(x)?.mean().to_vec())
    }

    fn has_link(&self) -> bool;
}

/// `‖fd∇ℓ_σ(x) − s(x)‖` for an oracle exposing its link function.
pub fn link_grad_residual(oracle: &dyn ScoreOps, x: &[f64], h: f64) -> Result<f64> {
    let eval = oracle.eval(x)?;
    if eval.link_value.is_none() {
        return Err(crate::Error::Unsupported(format!(
            "{} oracle has no link function",
            oracle.kind()
        )));
    }
    let grad = numerics::fd_gradient(
        |y| {
            oracle
                .eval(y)
                .ok()
                .and_then(|e| e.link_value)
                .unwrap_or(f64::NAN)
        },
        x,
        h,
    );
    Ok(numerics::dist(&grad, &eval.tweedie_mean))
}

/// Max-abs gap between the finite-difference Jacobian of `s` and `s'`.
pub fn mean_jacobian_residual(oracle: &dyn ScoreOps, x: &[f64], h: f64) -> Result<f64> {
    let eval = oracle.eval(x)?;
    let fd = numerics::fd_jacobian(
        |y| {
            oracle
                .mean(y)
                .unwrap_or_else(|_| vec![f64::NAN; y.len()])
        },
        x,
        h,
    );
    Ok(fd.sub(&eval.tweedie_jacobian)?.max_abs())
}

/// Splits `0..n` into fixed chunks and maps each, returning results in
/// chunk order. Chunk boundaries do not depend on the thread count, so
/// reductions over the returned vector are bitwise reproducible.
pub(crate) fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let ranges: Vec<_> = (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect();
    #[cfg(feature = "parallel")]
    {
        if ranges.len() > 1 {
            use rayon::prelude::*;
            return ranges.into_par_iter().map(f).collect();
        }
    }
    ranges.into_iter().map(f).collect()
}
