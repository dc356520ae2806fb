use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::ScoreMlp;
use crate::error::{Error, Result};
use crate::rng;

/// Time interval of the variance-exploding diffusion, `σ(t) = t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VeSchedule {
    pub t_max: f64,
    pub t_min: f64,
}

impl Default for VeSchedule {
    fn default() -> Self {
        Self {
            t_max: 3.0,
            t_min: 1e-4,
        }
    }
}

/// Euler–Maruyama integration of the reverse VE SDE
/// `dX̄ = 2(T−t) ∇log p_{T−t}(X̄) dt + √(2(T−t)) dW` on the uniform grid over
/// `[0, T − ε]`, starting from `N(0, T² I)`.
pub fn ve_reverse_sample(
    mlp: &ScoreMlp,
    count: usize,
    steps: usize,
    schedule: VeSchedule,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(0.0 < schedule.t_min && schedule.t_min < schedule.t_max) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < t_min < t_max, got {schedule:?}"
        )));
    }
    let dim = mlp.ambient_dim();
    let mut rng = rng::stream(seed, "ve-sampler");
    let t_max = schedule.t_max;
    let dt = if steps == 0 {
        0.0
    } else {
        (t_max - schedule.t_min) / steps as f64
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x: Vec<f64> = (0..dim)
            .map(|_| t_max * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for k in 0..steps {
            let sigma = t_max - k as f64 * dt;
            let score = mlp.score(&x, sigma);
            let noise_scale = (2.0 * sigma * dt).sqrt();
            for (xi, si) in x.iter_mut().zip(&score) {
                let z: f64 = rng.sample(StandardNormal);
                *xi += 2.0 * sigma * si * dt + noise_scale * z;
            }
        }
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_steps_returns_gaussian_initializations() {
        let net = ScoreMlp::new(&[3, 8, 2], 0).unwrap();
        let a = ve_reverse_sample(&net, 2000, 0, VeSchedule::default(), 5).unwrap();
        let var: f64 = a.iter().map(|p| p[0] * p[0]).sum::<f64>() / a.len() as f64;
        assert!((var - 9.0).abs() < 0.9, "variance {var}");
        assert_eq!(a, ve_reverse_sample(&net, 2000, 0, VeSchedule::default(), 5).unwrap());
    }

    #[test]
    fn rejects_bad_schedule() {
        let net = ScoreMlp::new(&[2, 4, 1], 0).unwrap();
        let s = VeSchedule {
            t_max: 1.0,
            t_min: 2.0,
        };
        assert!(ve_reverse_sample(&net, 1, 1, s, 0).is_err());
    }
}
