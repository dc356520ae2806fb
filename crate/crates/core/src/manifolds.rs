//! Exactly known embedded manifolds used as ground truth.
//!
//! Each manifold exposes the closest-point projection `π`, its derivative
//! `π'`, the tangent projector at manifold points, uniform sampling and the
//! distance function. Matrix manifolds use the row-major flattening of
//! [`Matrix`].

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::rng;

/// Singular values / norms below this make the projection non-unique.
const DEGENERACY_TOL: f64 = 1e-12;
/// Tolerance for "on the manifold" preconditions.
const ON_MANIFOLD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Manifold {
    /// Circle of the given radius in ℝ².
    Circle { radius: f64 },
    /// Sphere `{x ∈ ℝ^dim : ‖x‖ = radius}`.
    Sphere { dim: usize, radius: f64 },
    /// Orthogonal group `O(n) ⊂ ℝ^{n×n}`.
    Orthogonal { n: usize },
}

impl Manifold {
    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        Ok(Manifold::Circle { radius })
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "sphere ambient dimension must be at least 2, got {dim}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Manifold::Sphere { dim, radius })
    }

    pub fn orthogonal(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("O(n) needs n >= 1".into()));
        }
        Ok(Manifold::Orthogonal { n })
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            Manifold::Circle { .. } => 2,
            Manifold::Sphere { dim, .. } => dim,
            Manifold::Orthogonal { n } => n * n,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Manifold::Circle { radius } => format!("circle(r={radius})"),
            Manifold::Sphere { dim, radius } => format!("sphere(d={dim},r={radius})"),
            Manifold::Orthogonal { n } => format!("O({n})"),
        }
    }

    fn radius(&self) -> Option<f64> {
        match *self {
            Manifold::Circle { radius } | Manifold::Sphere { radius, .. } => Some(radius),
            Manifold::Orthogonal { .. } => None,
        }
    }

    /// Radius of the tube in which validation harnesses place test points.
    pub fn safe_tube_radius(&self) -> f64 {
        match self.radius() {
            Some(r) => r / 2.0,
            None => 0.4,
        }
    }

    fn check_dim(&self, x: &[f64], context: &'static str) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.ambient_dim(),
                actual: x.len(),
            });
        }
        if !numerics::all_finite(x) {
            return Err(Error::NonFinite { context });
        }
        Ok(())
    }

    fn reshape(&self, x: &[f64]) -> Matrix {
        let n = match *self {
            Manifold::Orthogonal { n } => n,
            _ => unreachable!("reshape is only used for matrix manifolds"),
        };
        Matrix::from_vec(n, n, x.to_vec()).expect("checked dimension and finiteness")
    }

    fn polar_svd(&self, x: &[f64]) -> Result<numerics::SvdResult> {
        let svd = numerics::svd(&self.reshape(x))?;
        let s_min = svd.singular_values.last().copied().unwrap_or(0.0);
        if s_min < DEGENERACY_TOL {
            return Err(Error::OutsideTube(format!(
                "matrix has singular value {s_min:e}; polar factor is not unique"
            )));
        }
        Ok(svd)
    }

    /// Closest point on the manifold.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x, "project")?;
        match self.radius() {
            Some(r) => {
                let nx = numerics::norm(x);
                if nx < DEGENERACY_TOL {
                    return Err(Error::OutsideTube(format!(
                        "‖x‖ = {nx:e}; every point of the sphere is equidistant"
                    )));
                }
                Ok(numerics::scaled(x, r / nx))
            }
            None => {
                let svd = self.polar_svd(x)?;
                Ok(svd.u.matmul(&svd.vt)?.into_vec())
            }
        }
    }

    /// Directional derivative `π'(x)·v`.
    pub fn projection_jvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x, "projection_jvp")?;
        self.check_dim(v, "projection_jvp")?;
        match self.radius() {
            Some(r) => {
                let nx = numerics::norm(x);
                if nx < DEGENERACY_TOL {
                    return Err(Error::OutsideTube(format!("‖x‖ = {nx:e}")));
                }
                let u = numerics::scaled(x, 1.0 / nx);
                let along = numerics::dot(&u, v);
                Ok(numerics::axpy(v, -along, &u)
                    .into_iter()
                    .map(|t| t * r / nx)
                    .collect())
            }
            None => {
                // With X = U S Vᵀ the polar factor moves by U K Vᵀ, where
                // K_ij = (C_ij − C_ji)/(s_i + s_j) and C = Uᵀ Ẋ V.
                let svd = self.polar_svd(x)?;
                let dx = self.reshape(v);
                let c = svd.u.transpose().matmul(&dx)?.matmul(&svd.vt.transpose())?;
                let n = c.rows();
                let s = &svd.singular_values;
                let mut k = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        k[(i, j)] = (c[(i, j)] - c[(j, i)]) / (s[i] + s[j]);
                    }
                }
                Ok(svd.u.matmul(&k)?.matmul(&svd.vt)?.into_vec())
            }
        }
    }

    /// Full Jacobian `π'(x)`, built column by column from [`Self::projection_jvp`].
    pub fn projection_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        let d = self.ambient_dim();
        let mut jac = Matrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.projection_jvp(x, &e)?;
            e[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        Ok(jac)
    }

    /// Defining-equation residual: `|‖x‖ − r|` for spheres, `‖XᵀX − I‖_F` for O(n).
    pub fn constraint_residual(&self, x: &[f64]) -> f64 {
        match self.radius() {
            Some(r) => (numerics::norm(x) - r).abs(),
            None => {
                let m = self.reshape(x);
                let n = m.rows();
                m.transpose()
                    .matmul(&m)
                    .and_then(|g| g.sub(&Matrix::identity(n)))
                    .map(|d| d.frobenius_norm())
                    .unwrap_or(f64::INFINITY)
            }
        }
    }

    fn check_on_manifold(&self, p: &[f64]) -> Result<()> {
        let residual = self.constraint_residual(p);
        let scale = self.radius().unwrap_or(1.0).max(1.0);
        if !(residual <= ON_MANIFOLD_TOL * scale) {
            return Err(Error::OffManifold { residual });
        }
        Ok(())
    }

    /// Orthogonal projection of `v` onto `T_p M`.
    pub fn tangent_project(&self, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p, "tangent_project")?;
        self.check_dim(v, "tangent_project")?;
        self.check_on_manifold(p)?;
        match self.radius() {
            Some(_) => {
                let u = numerics::scaled(p, 1.0 / numerics::norm(p));
                Ok(numerics::axpy(v, -numerics::dot(&u, v), &u))
            }
            None => {
                let xm = self.reshape(p);
                let vm = self.reshape(v);
                let inner = xm.transpose().matmul(&vm)?.skew();
                Ok(xm.matmul(&inner)?.into_vec())
            }
        }
    }

    /// Riemannian gradient of a function with Euclidean gradient `euclid_grad` at `p`.
    pub fn riemannian_grad(&self, p: &[f64], euclid_grad: &[f64]) -> Result<Vec<f64>> {
        self.tangent_project(p, euclid_grad)
    }

    /// `‖x − π(x)‖`.
    pub fn dist_to_manifold(&self, x: &[f64]) -> Result<f64> {
        let p = self.project(x)?;
        Ok(numerics::dist(x, &p))
    }

    /// I.i.d. uniform (Haar for O(n)) samples, deterministic per seed.
    pub fn sample_uniform(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::stream(seed, "manifold-sample");
        self.sample_uniform_with(&mut rng, count)
    }

    pub fn sample_uniform_with<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.ambient_dim();
        loop {
            let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            match *self {
                Manifold::Circle { radius } | Manifold::Sphere { radius, .. } => {
                    let n = numerics::norm(&g);
                    if n > 1e-300 {
                        return numerics::scaled(&g, radius / n);
                    }
                }
                Manifold::Orthogonal { n } => {
                    let m = Matrix::from_vec(n, n, g).expect("finite gaussian draws");
                    // Gram–Schmidt keeps diag(R) > 0, which is the Haar sign fix.
                    if let Ok((q, _)) = numerics::qr(&m) {
                        return q.into_vec();
                    }
                }
            }
        }
    }

    /// Unit normal direction at manifold point `p`, drawn at random.
    pub fn random_unit_normal<R: Rng + ?Sized>(&self, p: &[f64], rng: &mut R) -> Vec<f64> {
        match *self {
            Manifold::Circle { .. } | Manifold::Sphere { .. } => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                numerics::scaled(p, sign / numerics::norm(p))
            }
            Manifold::Orthogonal { n } => {
                let g: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
                let s = Matrix::from_vec(n, n, g).expect("finite").sym();
                let s = s.scale(1.0 / s.frobenius_norm());
                self.reshape(p).matmul(&s).expect("square").into_vec()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        numerics::dist(a, b) <= tol
    }

    #[test]
    fn constructors_validate() {
        assert!(Manifold::circle(0.0).is_err());
        assert!(Manifold::sphere(1, 1.0).is_err());
        assert!(Manifold::orthogonal(0).is_err());
        assert_eq!(Manifold::orthogonal(3).unwrap().ambient_dim(), 9);
    }

    #[test]
    fn project_examples() {
        let s = Manifold::sphere(3, 1.0).unwrap();
        assert!(close(&s.project(&[2.0, 0.0, 0.0]).unwrap(), &[1.0, 0.0, 0.0], 1e-15));

        let o = Manifold::orthogonal(2).unwrap();
        let p = o.project(&[2.0, 0.0, 0.0, 0.5]).unwrap();
        assert!(close(&p, &[1.0, 0.0, 0.0, 1.0], 1e-14));

        let p = o.project(&[0.0, 2.0, -0.5, 0.0]).unwrap();
        assert!(close(&p, &[0.0, 1.0, -1.0, 0.0], 1e-14));
    }

    #[test]
    fn polar_projection_beats_brute_force_over_o2() {
        // O(2) = rotations R(t) and reflections R(t)·diag(1,−1).
        let o = Manifold::orthogonal(2).unwrap();
        let x = [0.3, 2.0, -0.5, 0.1];
        let p = o.project(&x).unwrap();
        let best = numerics::dist(&x, &p);
        for k in 0..20_000 {
            let t = k as f64 * std::f64::consts::TAU / 20_000.0;
            let (c, s) = (t.cos(), t.sin());
            for q in [[c, -s, s, c], [c, s, s, -c]] {
                assert!(numerics::dist(&x, &q) >= best - 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_points_are_rejected() {
        let s = Manifold::circle(1.0).unwrap();
        assert!(matches!(s.project(&[0.0, 0.0]), Err(Error::OutsideTube(_))));
        let o = Manifold::orthogonal(2).unwrap();
        assert!(matches!(
            o.project(&[1.0, 0.0, 0.0, 0.0]),
            Err(Error::OutsideTube(_))
        ));
    }

    #[test]
    fn tangent_project_examples() {
        let s = Manifold::circle(1.0).unwrap();
        assert_eq!(s.tangent_project(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), vec![0.0, 3.0]);
        assert_eq!(s.tangent_project(&[1.0, 0.0], &[5.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            s.tangent_project(&[1.1, 0.0], &[1.0, 0.0]),
            Err(Error::OffManifold { .. })
        ));

        let o = Manifold::orthogonal(2).unwrap();
        let t = o
            .tangent_project(&[1.0, 0.0, 0.0, 1.0], &[1.0, 1.0, -1.0, 1.0])
            .unwrap();
        assert!(close(&t, &[0.0, 1.0, -1.0, 0.0], 1e-15));
    }

    #[test]
    fn orthogonal_tangent_matches_projection_derivative_on_manifold() {
        // On the manifold π' equals the tangent projector.
        let o = Manifold::orthogonal(3).unwrap();
        let p = &o.sample_uniform(1, 4)[0];
        let v: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let fd = numerics::fd_jacobian(|x| o.project(x).unwrap(), p, 1e-6)
            .matvec(&v)
            .unwrap();
        let tp = o.tangent_project(p, &v).unwrap();
        assert!(close(&fd, &tp, 1e-8));
    }

    #[test]
    fn riemannian_grad_examples() {
        let s = Manifold::circle(1.0).unwrap();
        assert_eq!(s.riemannian_grad(&[0.0, 1.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(s.riemannian_grad(&[0.0, 1.0], &[2.0, 7.0]).unwrap(), vec![2.0, 0.0]);
        let o = Manifold::orthogonal(2).unwrap();
        let g = o
            .riemannian_grad(&[1.0, 0.0, 0.0, 1.0], &[3.0, -1.0, -1.0, 2.0])
            .unwrap();
        assert_eq!(g, vec![0.0; 4]);
    }

    #[test]
    fn distance_examples() {
        let s = Manifold::circle(1.0).unwrap();
        assert_abs_diff_eq!(s.dist_to_manifold(&[3.0, 0.0]).unwrap(), 2.0);
        assert!(s.dist_to_manifold(&[0.6, 0.8]).unwrap() < 1e-12);
        let o = Manifold::orthogonal(2).unwrap();
        assert_abs_diff_eq!(
            o.dist_to_manifold(&[2.0, 0.0, 0.0, 0.5]).unwrap(),
            1.25f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn circle_samples_lie_on_circle() {
        let c = Manifold::circle(2.5).unwrap();
        for p in c.sample_uniform(1000, 1) {
            assert!((numerics::norm(&p) - 2.5).abs() < 1e-12);
        }
        assert_eq!(c.sample_uniform(5, 9), c.sample_uniform(5, 9));
    }

    #[test]
    fn sphere_projection_jacobian_closed_form() {
        let s = Manifold::sphere(3, 1.3).unwrap();
        let x = [0.4, -1.1, 0.7];
        let fd = numerics::fd_jacobian(|y| s.project(y).unwrap(), &x, 1e-5);
        let nx = numerics::norm(&x);
        let mut want = Matrix::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                want[(i, j)] -= x[i] * x[j] / (nx * nx);
            }
        }
        let want = want.scale(1.3 / nx);
        assert!(fd.sub(&want).unwrap().max_abs() < 1e-6);
        let analytic = s.projection_jacobian(&x).unwrap();
        assert!(analytic.sub(&want).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn orthogonal_projection_jacobian_matches_fd_off_manifold() {
        let o = Manifold::orthogonal(3).unwrap();
        let mut rng = rng::stream(11, "test");
        let p = o.sample_uniform_with(&mut rng, 1).remove(0);
        let nrm = o.random_unit_normal(&p, &mut rng);
        let x = numerics::axpy(&p, 0.25, &nrm);
        let fd = numerics::fd_jacobian(|y| o.project(y).unwrap(), &x, 1e-5);
        let an = o.projection_jacobian(&x).unwrap();
        assert!(fd.sub(&an).unwrap().max_abs() < 1e-8);
        assert!(an.asymmetry() < 1e-12);
    }
}
