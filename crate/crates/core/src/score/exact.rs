use super::{Linearization, ScoreEval, ScoreOps};
use crate::error::Result;
use crate::manifolds::Manifold;
use crate::numerics;

/// Zero-noise oracle for a known manifold: the mean is `π(x)`, the Jacobian
/// `π'(x)`, and the link `½‖x‖² − ½dist(x)²`.
#[derive(Debug, Clone, Copy)]
pub struct ExactManifoldScore {
    manifold: Manifold,
}

impl ExactManifoldScore {
    pub fn new(manifold: Manifold) -> Self {
        Self { manifold }
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }
}

struct ExactLinearization<'a> {
    manifold: &'a Manifold,
    x: Vec<f64>,
    mean: Vec<f64>,
    link: f64,
}

impl Linearization for ExactLinearization<'_> {
    fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn vjp(&self, v: &[f64]) -> Vec<f64> {
        // π' is symmetric (it is I minus the Hessian of the squared distance).
        self.manifold
            .projection_jvp(&self.x, v)
            .unwrap_or_else(|_| vec![f64::NAN; v.len()])
    }

    fn link_value(&self) -> Option<f64> {
        Some(self.link)
    }
}

fn link(x: &[f64], p: &[f64]) -> f64 {
    let d = numerics::dist(x, p);
    0.5 * numerics::dot(x, x) - 0.5 * d * d
}

impl ScoreOps for ExactManifoldScore {
    fn ambient_dim(&self) -> usize {
        self.manifold.ambient_dim()
    }

    fn kind(&self) -> String {
        format!("exact({})", self.manifold.name())
    }

    fn linearize<'a>(&'a self, x: &[f64]) -> Result<Box<dyn Linearization + 'a>> {
        let mean = self.manifold.project(x)?;
        Ok(Box::new(ExactLinearization {
            manifold: &self.manifold,
            link: link(x, &mean),
            x: x.to_vec(),
            mean,
        }))
    }

    fn eval(&self, x: &[f64]) -> Result<ScoreEval> {
        let mean = self.manifold.project(x)?;
        Ok(ScoreEval {
            link_value: Some(link(x, &mean)),
            link_constant: 0.0,
            tweedie_jacobian: self.manifold.projection_jacobian(x)?,
            tweedie_mean: mean,
        })
    }

    fn mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.manifold.project(x)
    }

    fn has_link(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DEFAULT_FD_STEP;
    use crate::score::{link_grad_residual, mean_jacobian_residual};

    #[test]
    fn exact_adapter_identities() {
        for m in [
            Manifold::circle(1.0).unwrap(),
            Manifold::sphere(4, 2.0).unwrap(),
            Manifold::orthogonal(3).unwrap(),
        ] {
            let o = ExactManifoldScore::new(m);
            let p = &m.sample_uniform(1, 3)[0];
            let mut r = crate::rng::stream(3, "normal");
            let n = m.random_unit_normal(p, &mut r);
            let x = numerics::axpy(p, 0.2 * m.safe_tube_radius(), &n);
            assert!(link_grad_residual(&o, &x, DEFAULT_FD_STEP).unwrap() < 1e-7);
            assert!(mean_jacobian_residual(&o, &x, DEFAULT_FD_STEP).unwrap() < 1e-7);
        }
    }
}
