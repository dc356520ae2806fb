//! Objective functions with analytic gradients.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::rng;

/// A differentiable objective on the ambient space.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_grad(x)?.0)
    }

    fn name(&self) -> String;
}

fn check_len(context: &'static str, expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

fn check_symmetric(m: &Matrix, what: &str) -> Result<()> {
    if !m.is_square() || m.asymmetry() > 1e-12 {
        return Err(Error::InvalidParameter(format!("{what} must be symmetric")));
    }
    Ok(())
}

/// Brockett cost `tr(A X Q Xᵀ)` on `n × n` matrices.
#[derive(Debug, Clone)]
pub struct BrockettObjective {
    a: Matrix,
    q: Matrix,
}

impl BrockettObjective {
    pub fn new(a: Matrix, q: Matrix) -> Result<Self> {
        check_symmetric(&a, "A")?;
        check_symmetric(&q, "Q")?;
        if a.rows() != q.rows() {
            return Err(Error::DimensionMismatch {
                context: "BrockettObjective",
                expected: a.rows(),
                actual: q.rows(),
            });
        }
        Ok(Self { a, q })
    }

    /// `A = (G + Gᵀ)/2` with standard normal `G`, `Q = diag(1, …, n)`.
    pub fn random_instance(n: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, "brockett-a");
        let g: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
        let a = Matrix::from_vec(n, n, g)?.sym();
        let q = Matrix::from_diag(&(1..=n).map(|i| i as f64).collect::<Vec<_>>());
        Self::new(a, q)
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    /// Minimum over `O(n)` for diagonal `Q` with distinct entries: pair the
    /// ascending eigenvalues of `A` with the descending diagonal of `Q`.
    pub fn optimum(&self) -> Result<f64> {
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.q[(i, j)] != 0.0 {
                    return Err(Error::InvalidParameter("Q must be diagonal".into()));
                }
            }
        }
        let mut q = self.q.diag();
        q.sort_by(|a, b| b.total_cmp(a));
        if q.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "Q must have distinct diagonal entries".into(),
            ));
        }
        let eig = numerics::sym_eig(&self.a)?;
        Ok(eig.eigenvalues.iter().zip(&q).map(|(a, q)| a * q).sum())
    }
}

impl Objective for BrockettObjective {
    fn dim(&self) -> usize {
        self.n() * self.n()
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("brockett", self.dim(), x)?;
        let n = self.n();
        let xm = Matrix::from_vec(n, n, x.to_vec())?;
        let axq = self.a.matmul(&xm)?.matmul(&self.q)?;
        // tr(A X Q Xᵀ) = ⟨A X Q, X⟩_F.
        let value = numerics::dot(axq.as_slice(), x);
        Ok((value, numerics::scaled(axq.as_slice(), 2.0)))
    }

    fn name(&self) -> String {
        format!("brockett(n={})", self.n())
    }
}

/// Finite-horizon tracking cost on `z = (u_0, …, u_{N−1}, y_0, …, y_N)`:
/// `Σ_{k<N} u_kᵀ R u_k + (y_k − r_k)ᵀ Q (y_k − r_k) + (y_N − r_N)ᵀ Q (y_N − r_N)`.
#[derive(Debug, Clone)]
pub struct TrackingObjective {
    reference: Vec<f64>,
    q_weight: Matrix,
    r_weight: Matrix,
    horizon: usize,
    input_dim: usize,
    output_dim: usize,
}

impl TrackingObjective {
    /// `reference` holds `r_0 … r_N` row by row (`(N+1) · n_y` values).
    pub fn new(reference: Vec<f64>, q_weight: Matrix, r_weight: Matrix, horizon: usize) -> Result<Self> {
        check_symmetric(&q_weight, "Q")?;
        check_symmetric(&r_weight, "R")?;
        let output_dim = q_weight.rows();
        let input_dim = r_weight.rows();
        check_len("tracking reference", (horizon + 1) * output_dim, &reference)?;
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        let q_min = numerics::sym_eig(&q_weight)?.eigenvalues[0];
        let r_min = numerics::sym_eig(&r_weight)?.eigenvalues[0];
        if q_min < -1e-12 {
            return Err(Error::InvalidParameter("Q must be positive semidefinite".into()));
        }
        if r_min <= 0.0 {
            return Err(Error::InvalidParameter("R must be positive definite".into()));
        }
        Ok(Self {
            reference,
            q_weight,
            r_weight,
            horizon,
            input_dim,
            output_dim,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// Offset of the output block in the flattened layout.
    pub fn output_offset(&self) -> usize {
        self.horizon * self.input_dim
    }
}

impl Objective for TrackingObjective {
    fn dim(&self) -> usize {
        self.horizon * self.input_dim + (self.horizon + 1) * self.output_dim
    }

    fn value_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("tracking objective", self.dim(), z)?;
        let mut grad = vec![0.0; z.len()];
        let mut value = 0.0;
        let (nu, ny) = (self.input_dim, self.output_dim);
        for k in 0..self.horizon {
            let u = &z[k * nu..(k + 1) * nu];
            let ru = self.r_weight.matvec(u)?;
            value += numerics::dot(u, &ru);
            for (g, v) in grad[k * nu..(k + 1) * nu].iter_mut().zip(&ru) {
                *g = 2.0 * v;
            }
        }
        let off = self.output_offset();
        for k in 0..=self.horizon {
            let y = &z[off + k * ny..off + (k + 1) * ny];
            let e = numerics::sub(y, &self.reference[k * ny..(k + 1) * ny]);
            let qe = self.q_weight.matvec(&e)?;
            value += numerics::dot(&e, &qe);
            for (g, v) in grad[off + k * ny..off + (k + 1) * ny].iter_mut().zip(&qe) {
                *g = 2.0 * v;
            }
        }
        Ok((value, grad))
    }

    fn name(&self) -> String {
        format!(
            "tracking(N={},nu={},ny={})",
            self.horizon, self.input_dim, self.output_dim
        )
    }
}

/// `f(x) = a · x`.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    a: Vec<f64>,
}

impl LinearObjective {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.iter().all(|&v| v == 0.0) || !numerics::all_finite(&a) {
            return Err(Error::InvalidParameter(
                "linear objective needs a finite non-zero direction".into(),
            ));
        }
        Ok(Self { a })
    }

    pub fn direction(&self) -> &[f64] {
        &self.a
    }

    /// Unique minimizer on the sphere of radius `r` centred at the origin.
    pub fn sphere_minimizer(&self, radius: f64) -> Vec<f64> {
        numerics::scaled(&self.a, -radius / numerics::norm(&self.a))
    }
}

impl Objective for LinearObjective {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("linear objective", self.a.len(), x)?;
        Ok((numerics::dot(&self.a, x), self.a.clone()))
    }

    fn name(&self) -> String {
        "linear".into()
    }
}

/// Constant objective; its gradient vanishes everywhere.
#[derive(Debug, Clone)]
pub struct ConstantObjective {
    pub dim: usize,
    pub value: f64,
}

impl Objective for ConstantObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("constant objective", self.dim, x)?;
        Ok((self.value, vec![0.0; self.dim]))
    }

    fn name(&self) -> String {
        "constant".into()
    }
}

/// Largest `‖∇f − fd∇f‖ / (1 + ‖∇f‖)` over `points`.
pub fn grad_check(f: &dyn Objective, points: &[Vec<f64>], h: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in points {
        let (_, g) = f.value_grad(p)?;
        let fd = numerics::fd_gradient(|y| f.value(y).unwrap_or(f64::NAN), p, h);
        let err = numerics::dist(&g, &fd) / (1.0 + numerics::norm(&g));
        if !err.is_finite() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(err);
    }
    Ok(worst)
}
