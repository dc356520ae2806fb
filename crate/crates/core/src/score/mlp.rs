use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Linearization, ScoreEval, ScoreOps};
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::rng;

/// Leading bytes of a serialized network.
pub const MODEL_MAGIC: &[u8; 6] = b"MSOPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros_like(&self) -> Self {
        Self {
            weights: Matrix::zeros(self.weights.rows(), self.weights.cols()),
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.bias
                .iter()
                .enumerate()
                .map(|(i, b)| b + numerics::dot(self.weights.row(i), input)),
        );
    }
}

/// Fully connected rectifier network taking `[x; σ]` and returning the
/// rescaled score `s̃(x, σ)`; the score itself is `s̃ / σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMlp {
    layers: Vec<DenseLayer>,
}

/// Pre-activations and activations of one forward pass.
pub(crate) struct ForwardCache {
    /// `acts[0]` is the input, `acts[k]` the output of layer `k`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().expect("at least one layer")
    }
}

impl ScoreMlp {
    /// He-initialized hidden layers and a zero output layer.
    ///
    /// `widths` runs from the input width `d + 1` to the output width `d`.
    pub fn new(widths: &[usize], seed: u64) -> Result<Self> {
        validate_widths(widths)?;
        let mut rng = rng::stream(seed, "mlp-init");
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = (2.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| {
                        if k == last {
                            0.0
                        } else {
                            std * rng.sample::<f64, _>(StandardNormal)
                        }
                    })
                    .collect();
                DenseLayer {
                    weights: Matrix::from_vec(fan_out, fan_in, data).expect("finite init"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Default architecture `(d+1, 128, 128, 128, d)`.
    pub fn default_widths(dim: usize) -> Vec<usize> {
        vec![dim + 1, 128, 128, 128, dim]
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyInput("ScoreMlp layers"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.rows() {
                return Err(Error::DimensionMismatch {
                    context: "ScoreMlp bias",
                    expected: l.weights.rows(),
                    actual: l.bias.len(),
                });
            }
            if let Some(next) = layers.get(k + 1) {
                if next.weights.cols() != l.weights.rows() {
                    return Err(Error::DimensionMismatch {
                        context: "ScoreMlp layer chain",
                        expected: l.weights.rows(),
                        actual: next.weights.cols(),
                    });
                }
            }
        }
        let widths: Vec<usize> = std::iter::once(layers[0].weights.cols())
            .chain(layers.iter().map(|l| l.weights.rows()))
            .collect();
        validate_widths(&widths)?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub(crate) fn zero_grads(&self) -> Vec<DenseLayer> {
        self.layers.iter().map(DenseLayer::zeros_like).collect()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].weights.cols())
            .chain(self.layers.iter().map(|l| l.weights.rows()))
            .collect()
    }

    pub fn ambient_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weights.rows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    fn input(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let mut input = Vec::with_capacity(x.len() + 1);
        input.extend_from_slice(x);
        input.push(sigma);
        input
    }

    pub(crate) fn forward_cached(&self, x: &[f64], sigma: f64) -> ForwardCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(self.input(x, sigma));
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.apply(&acts[k], &mut z);
            let a = if k == last {
                z.clone()
            } else {
                z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
            };
            pre.push(z);
            acts.push(a);
        }
        ForwardCache { acts, pre }
    }

    /// Backpropagates `g_out` (gradient w.r.t. the network output) and
    /// returns the gradient w.r.t. the full input `[x; σ]`. Parameter
    /// gradients are accumulated into `grads` when given.
    pub(crate) fn backward(
        &self,
        cache: &ForwardCache,
        g_out: &[f64],
        mut grads: Option<&mut [DenseLayer]>,
    ) -> Vec<f64> {
        let mut g = g_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if k + 1 < self.layers.len() {
                for (gi, &z) in g.iter_mut().zip(&cache.pre[k]) {
                    if z <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            let a_in = &cache.acts[k];
            if let Some(gr) = grads.as_deref_mut() {
                let gl = &mut gr[k];
                let cols = gl.weights.cols();
                let w = gl.weights.as_mut_slice();
                for (i, &gi) in g.iter().enumerate() {
                    if gi == 0.0 {
                        continue;
                    }
                    gl.bias[i] += gi;
                    for (wij, aj) in w[i * cols..(i + 1) * cols].iter_mut().zip(a_in) {
                        *wij += gi * aj;
                    }
                }
            }
            g = layer.weights.tr_matvec(&g).expect("layer shapes are consistent");
        }
        g
    }

    /// `s̃(x, σ)`.
    pub fn output(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        self.forward_cached(x, sigma).output().to_vec()
    }

    /// Score estimate `s̃(x, σ) / σ`.
    pub fn score(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        numerics::scaled(&self.output(x, sigma), 1.0 / sigma)
    }

    /// `x + σ² · score = x + σ s̃`.
    pub fn tweedie_mean(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        numerics::axpy(x, sigma, &self.output(x, sigma))
    }

    /// Jacobian of `s̃` with respect to the full input `[x; σ]`, as the
    /// product of layer Jacobians with rectifier masks (ties count as inactive).
    pub fn input_jacobian(&self, x: &[f64], sigma: f64) -> Matrix {
        let cache = self.forward_cached(x, sigma);
        let mut jac = self.layers[0].weights.clone();
        for k in 1..self.layers.len() {
            for (i, &z) in cache.pre[k - 1].iter().enumerate() {
                if z <= 0.0 {
                    for j in 0..jac.cols() {
                        jac[(i, j)] = 0.0;
                    }
                }
            }
            jac = self.layers[k]
                .weights
                .matmul(&jac)
                .expect("layer shapes are consistent");
        }
        jac
    }

    /// Tweedie mean and Jacobian `I + σ ∂s̃/∂x`; no link value.
    pub fn score_eval(&self, x: &[f64], sigma: f64) -> Result<ScoreEval> {
        let d = self.ambient_dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                context: "mlp_score_eval",
                expected: d,
                actual: x.len(),
            });
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        let full = self.input_jacobian(x, sigma);
        let mut jac = Matrix::identity(d);
        for i in 0..d {
            for j in 0..d {
                jac[(i, j)] += sigma * full[(i, j)];
            }
        }
        Ok(ScoreEval {
            tweedie_mean: self.tweedie_mean(x, sigma),
            tweedie_jacobian: jac,
            link_value: None,
            link_constant: 0.0,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(self.layers.len() as u64).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.weights.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(l.weights.cols() as u64).to_le_bytes());
            for v in l.weights.as_slice().iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(MODEL_MAGIC.len())? != MODEL_MAGIC {
            return Err(Error::Parse("missing MSOPT1 magic".into()));
        }
        let count = r.u64()? as usize;
        let mut layers = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let weights = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let bias = (0..rows).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(DenseLayer {
                weights: Matrix::from_vec(rows, cols, weights)?,
                bias,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Parse(format!(
                "{} trailing bytes after model",
                bytes.len() - r.pos
            )));
        }
        Self::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::InvalidParameter(
            "network needs an input and an output width".into(),
        ));
    }
    let (first, last) = (widths[0], widths[widths.len() - 1]);
    if first != last + 1 || widths.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "widths {widths:?}: input width must be output width + 1"
        )));
    }
    Ok(())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Parse("truncated model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// A trained network used as a score oracle at a fixed noise level.
#[derive(Debug, Clone)]
pub struct MlpScoreOracle {
    mlp: ScoreMlp,
    sigma: f64,
}

impl MlpScoreOracle {
    pub fn new(mlp: ScoreMlp, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { mlp, sigma })
    }

    pub fn network(&self) -> &ScoreMlp {
        &self.mlp
    }
}

struct MlpLinearization<'a> {
    mlp: &'a ScoreMlp,
    cache: ForwardCache,
    mean: Vec<f64>,
    sigma: f64,
}

impl Linearization for MlpLinearization<'_> {
    fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn vjp(&self, v: &[f64]) -> Vec<f64> {
        // Backpropagate ⟨s(x), v⟩ with v held fixed: vᵀ(I + σ ∂s̃/∂x).
        let g = self.mlp.backward(&self.cache, v, None);
        v.iter()
            .zip(&g)
            .map(|(vi, gi)| vi + self.sigma * gi)
            .collect()
    }

    fn link_value(&self) -> Option<f64> {
        None
    }
}

impl ScoreOps for MlpScoreOracle {
    fn ambient_dim(&self) -> usize {
        self.mlp.ambient_dim()
    }

    fn kind(&self) -> String {
        format!("mlp(widths={:?},sigma={})", self.mlp.widths(), self.sigma)
    }

    fn linearize<'a>(&'a self, x: &[f64]) -> Result<Box<dyn Linearization + 'a>> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp oracle",
                expected: self.ambient_dim(),
                actual: x.len(),
            });
        }
        let cache = self.mlp.forward_cached(x, self.sigma);
        let mean = numerics::axpy(x, self.sigma, cache.output());
        Ok(Box::new(MlpLinearization {
            mlp: &self.mlp,
            cache,
            mean,
            sigma: self.sigma,
        }))
    }

    fn eval(&self, x: &[f64]) -> Result<ScoreEval> {
        self.mlp.score_eval(x, self.sigma)
    }

    fn has_link(&self) -> bool {
        false
    }
}
