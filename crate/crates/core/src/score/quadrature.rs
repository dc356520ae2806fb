use super::{EmpiricalScoreOracle, Linearization, ScoreEval, ScoreOps};
use crate::error::{Error, Result};
use crate::manifolds::Manifold;

pub const MIN_NODES: usize = 64;

/// Score of the Gaussian-smoothed uniform measure on a circle, evaluated with
/// the periodic trapezoid rule on equispaced nodes.
#[derive(Debug, Clone)]
pub struct QuadratureScoreOracle {
    inner: EmpiricalScoreOracle,
    radius: f64,
    nodes: usize,
}

impl QuadratureScoreOracle {
    pub fn new(manifold: &Manifold, node_count: usize, sigma: f64) -> Result<Self> {
        let radius = match *manifold {
            Manifold::Circle { radius } => radius,
            other => {
                return Err(Error::Unsupported(format!(
                    "quadrature oracle supports circles only, got {}",
                    other.name()
                )))
            }
        };
        if node_count < MIN_NODES {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least {MIN_NODES} nodes, got {node_count}"
            )));
        }
        let mut flat = Vec::with_capacity(2 * node_count);
        for j in 0..node_count {
            let theta = std::f64::consts::TAU * j as f64 / node_count as f64;
            flat.push(radius * theta.cos());
            flat.push(radius * theta.sin());
        }
        Ok(Self {
            inner: EmpiricalScoreOracle::from_flat(flat, 2, sigma)?,
            radius,
            nodes: node_count,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.inner.sigma()
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }
}

impl ScoreOps for QuadratureScoreOracle {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn kind(&self) -> String {
        format!(
            "quadrature(circle r={},nodes={},sigma={})",
            self.radius,
            self.nodes,
            self.sigma()
        )
    }

    fn linearize<'a>(&'a self, x: &[f64]) -> Result<Box<dyn Linearization + 'a>> {
        self.inner.linearize(x)
    }

    fn eval(&self, x: &[f64]) -> Result<ScoreEval> {
        self.inner.eval(x)
    }

    fn mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner.mean(x)
    }

    fn has_link(&self) -> bool {
        true
    }
}
