use std::convert::Infallible;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// `log Σ exp(vᵢ)` with a max shift. All `-inf` inputs give `-inf`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("log_sum_exp"));
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Central-difference Jacobian; row `i` is output `i`, column `j` input `j`.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> Matrix
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut probe = x.to_vec();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        columns.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let m = columns.first().map_or(0, |c| c.len());
    let mut jac = Matrix::zeros(m, n);
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            jac[(i, j)] = *v;
        }
    }
    jac
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let plus = f(&probe);
            probe[j] = x[j] - h;
            let minus = f(&probe);
            probe[j] = x[j];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// One classical fourth-order Runge–Kutta step of `ẋ = f(x, u)` with the
/// input held constant over the step.
pub fn rk4_step<F>(f: F, x: &[f64], u: &[f64], dt: f64) -> Vec<f64>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    match try_rk4_step(|x, u| Ok::<_, Infallible>(f(x, u)), x, u, dt) {
        Ok(next) => next,
        Err(never) => match never {},
    }
}

/// [`rk4_step`] for dynamics that can fail.
pub fn try_rk4_step<F, E>(f: F, x: &[f64], u: &[f64], dt: f64) -> std::result::Result<Vec<f64>, E>
where
    F: Fn(&[f64], &[f64]) -> std::result::Result<Vec<f64>, E>,
{
    let offset = |k: &[f64], c: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(xi, ki)| xi + c * ki).collect()
    };
    let k1 = f(x, u)?;
    let k2 = f(&offset(&k1, 0.5 * dt), u)?;
    let k3 = f(&offset(&k2, 0.5 * dt), u)?;
    let k4 = f(&offset(&k3, dt), u)?;
    Ok((0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lse_examples() {
        assert_eq!(log_sum_exp(&[0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            log_sum_exp(&[3.0, 3.0]).unwrap(),
            3.0 + 2f64.ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            log_sum_exp(&[1000.0, 1000.0]).unwrap(),
            1000.0 + 2f64.ln(),
            epsilon = 1e-12
        );
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(matches!(log_sum_exp(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn fd_jacobian_examples() {
        let id = fd_jacobian(|x| x.to_vec(), &[0.3, -2.0], DEFAULT_FD_STEP);
        assert!(id.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-10);

        let j = fd_jacobian(|x| vec![x[0] * x[0], x[1]], &[1.0, 1.0], 1e-5);
        let want = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
        assert!(j.sub(&want).unwrap().max_abs() < 1e-8);

        let z = fd_jacobian(|_| vec![4.0, 5.0, 6.0], &[1.0, 2.0], 1e-5);
        assert_eq!(z.rows(), 3);
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn rk4_examples() {
        let x = rk4_step(|_, _| vec![0.0], &[1.7], &[], 0.3);
        assert_eq!(x, vec![1.7]);

        // RK4 on ẋ = −x reproduces the degree-4 Taylor polynomial of exp(−dt).
        let x = rk4_step(|x, _| vec![-x[0]], &[1.0], &[], 0.1);
        let taylor: f64 = 1.0 - 0.1 + 0.01 / 2.0 - 0.001 / 6.0 + 0.0001 / 24.0;
        assert_abs_diff_eq!(x[0], taylor, epsilon = 1e-15);
        assert_abs_diff_eq!(x[0], 0.9048375, epsilon = 1e-7);

        let x = rk4_step(|_, u| vec![u[0]], &[0.0], &[2.0], 0.5);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
    }
}
