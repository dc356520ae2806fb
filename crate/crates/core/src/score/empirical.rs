use super::{map_chunks, Linearization, ScoreEval, ScoreOps};
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

const CHUNK: usize = 512;

/// Exact score of the Gaussian-smoothed empirical measure `(1/N) Σ δ_{y_i}`.
///
/// The posterior over data points given `x` has softmax weights
/// `w_i ∝ exp(−‖x − y_i‖² / 2σ²)`; the Tweedie mean is its expectation and
/// the Tweedie Jacobian its covariance divided by `σ²`.
#[derive(Debug, Clone)]
pub struct EmpiricalScoreOracle {
    data: Vec<f64>,
    count: usize,
    dim: usize,
    sigma: f64,
}

struct Posterior {
    /// Indices with non-zero weight.
    support: Vec<usize>,
    weights: Vec<f64>,
    lse: f64,
}

impl EmpiricalScoreOracle {
    pub fn new(points: &[Vec<f64>], sigma: f64) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or(Error::EmptyInput("empirical oracle dataset"))?;
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "empirical oracle dataset",
                    expected: dim,
                    actual: p.len(),
                });
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(data, dim, sigma)
    }

    pub fn from_flat(data: Vec<f64>, dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if dim == 0 || data.is_empty() {
            return Err(Error::EmptyInput("empirical oracle dataset"));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                context: "empirical oracle dataset",
                expected: dim,
                actual: data.len() % dim,
            });
        }
        if !numerics::all_finite(&data) {
            return Err(Error::NonFinite { context: "empirical oracle dataset" });
        }
        Ok(Self {
            count: data.len() / dim,
            data,
            dim,
            sigma,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::from_flat(self.data.clone(), self.dim, sigma)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "empirical oracle",
                expected: self.dim,
                actual: x.len(),
            });
        }
        if !numerics::all_finite(x) {
            return Err(Error::NonFinite { context: "empirical oracle input" });
        }
        Ok(())
    }

    fn posterior(&self, x: &[f64]) -> Posterior {
        let inv = -0.5 / (self.sigma * self.sigma);
        let logw: Vec<f64> = map_chunks(self.count, CHUNK, |r| {
            r.map(|i| inv * sq_dist(self.point(i), x)).collect::<Vec<_>>()
        })
        .concat();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let partial: Vec<f64> = map_chunks(self.count, CHUNK, |r| {
            r.map(|i| (logw[i] - max).exp()).sum::<f64>()
        });
        let total: f64 = partial.iter().sum();
        let lse = max + total.ln();
        let mut support = Vec::new();
        let mut weights = Vec::new();
        for (i, &l) in logw.iter().enumerate() {
            let w = (l - max).exp() / total;
            if w > 0.0 {
                support.push(i);
                weights.push(w);
            }
        }
        Posterior {
            support,
            weights,
            lse,
        }
    }

    fn weighted_mean(&self, post: &Posterior) -> Vec<f64> {
        let dim = self.dim;
        let partial: Vec<Vec<f64>> = map_chunks(post.support.len(), CHUNK, |r| {
            let mut acc = vec![0.0; dim];
            for k in r {
                let y = self.point(post.support[k]);
                let w = post.weights[k];
                for (a, yi) in acc.iter_mut().zip(y) {
                    *a += w * yi;
                }
            }
            acc
        });
        let mut mean = vec![0.0; dim];
        for p in &partial {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        mean
    }

    fn link(&self, x: &[f64], lse: f64) -> f64 {
        0.5 * numerics::dot(x, x) + self.sigma * self.sigma * lse
    }

    fn link_constant(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        -s2 * ((self.count as f64).ln()
            + 0.5 * self.dim as f64 * (std::f64::consts::TAU * s2).ln())
    }

    fn covariance_over_sigma2(&self, post: &Posterior, mean: &[f64]) -> Matrix {
        let dim = self.dim;
        let partial: Vec<Vec<f64>> = map_chunks(post.support.len(), CHUNK, |r| {
            let mut acc = vec![0.0; dim * dim];
            let mut c = vec![0.0; dim];
            for k in r {
                let y = self.point(post.support[k]);
                let w = post.weights[k];
                for ((ci, yi), mi) in c.iter_mut().zip(y).zip(mean) {
                    *ci = yi - mi;
                }
                for i in 0..dim {
                    let wi = w * c[i];
                    for j in i..dim {
                        acc[i * dim + j] += wi * c[j];
                    }
                }
            }
            acc
        });
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        let mut jac = Matrix::zeros(dim, dim);
        for p in &partial {
            for i in 0..dim {
                for j in i..dim {
                    jac[(i, j)] += p[i * dim + j];
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = jac[(i, j)] * inv_s2;
                jac[(i, j)] = v;
                jac[(j, i)] = v;
            }
        }
        jac
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct EmpiricalLinearization<'a> {
    oracle: &'a EmpiricalScoreOracle,
    post: Posterior,
    mean: Vec<f64>,
    link: f64,
}

impl Linearization for EmpiricalLinearization<'_> {
    fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn vjp(&self, v: &[f64]) -> Vec<f64> {
        let o = self.oracle;
        let dim = o.dim;
        let partial: Vec<Vec<f64>> = map_chunks(self.post.support.len(), CHUNK, |r| {
            let mut acc = vec![0.0; dim];
            let mut c = vec![0.0; dim];
            for k in r {
                let y = o.point(self.post.support[k]);
                for ((ci, yi), mi) in c.iter_mut().zip(y).zip(&self.mean) {
                    *ci = yi - mi;
                }
                let coef = self.post.weights[k] * numerics::dot(&c, v);
                for (a, ci) in acc.iter_mut().zip(&c) {
                    *a += coef * ci;
                }
            }
            acc
        });
        let inv_s2 = 1.0 / (o.sigma * o.sigma);
        let mut out = vec![0.0; dim];
        for p in &partial {
            for (a, b) in out.iter_mut().zip(p) {
                *a += b;
            }
        }
        out.iter_mut().for_each(|a| *a *= inv_s2);
        out
    }

    fn link_value(&self) -> Option<f64> {
        Some(self.link)
    }
}

impl ScoreOps for EmpiricalScoreOracle {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> String {
        format!("empirical(n={},sigma={})", self.count, self.sigma)
    }

    fn linearize<'a>(&'a self, x: &[f64]) -> Result<Box<dyn Linearization + 'a>> {
        self.check(x)?;
        let post = self.posterior(x);
        let mean = self.weighted_mean(&post);
        let link = self.link(x, post.lse);
        Ok(Box::new(EmpiricalLinearization {
            oracle: self,
            post,
            mean,
            link,
        }))
    }

    fn eval(&self, x: &[f64]) -> Result<ScoreEval> {
        self.check(x)?;
        let post = self.posterior(x);
        let mean = self.weighted_mean(&post);
        let jac = self.covariance_over_sigma2(&post, &mean);
        Ok(ScoreEval {
            link_value: Some(self.link(x, post.lse)),
            link_constant: self.link_constant(),
            tweedie_mean: mean,
            tweedie_jacobian: jac,
        })
    }

    fn mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let post = self.posterior(x);
        Ok(self.weighted_mean(&post))
    }

    fn has_link(&self) -> bool {
        true
    }
}
