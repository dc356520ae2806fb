//! Jacobi-type dense factorizations.

use super::matrix::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-14;

/// Thin singular value decomposition `m = u · diag(s) · vt`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: Matrix,
    /// Non-negative, sorted descending.
    pub singular_values: Vec<f64>,
    /// `k × cols` with orthonormal rows.
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.singular_values.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.vt).expect("svd factors are conformable")
    }
}

/// Symmetric eigendecomposition `m = V · diag(λ) · Vᵀ`.
#[derive(Debug, Clone)]
pub struct EigResult {
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "svd" });
    }
    if m.rows() < m.cols() {
        let t = svd_tall(&m.transpose())?;
        return Ok(SvdResult {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
        });
    }
    svd_tall(m)
}

fn svd_tall(m: &Matrix) -> Result<SvdResult> {
    let (rows, n) = (m.rows(), m.cols());
    // Column-major working copies.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let alpha = super::dot(&a[p], &a[p]);
                let beta = super::dot(&a[q], &a[q]);
                let gamma = super::dot(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut a, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence {
            algorithm: "svd",
            iterations: MAX_SWEEPS,
            rows: m.rows(),
            cols: m.cols(),
        });
    }

    let norms: Vec<f64> = a.iter().map(|col| super::norm(col)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let s_max = norms.iter().cloned().fold(0.0, f64::max);
    let rank_tol = s_max * f64::EPSILON * (rows.max(n) as f64);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if norms[j] > rank_tol && norms[j] > 0.0 {
            u_cols.push(a[j].iter().map(|x| x / norms[j]).collect());
        } else {
            u_cols.push(vec![0.0; rows]);
            deficient.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &deficient);

    let mut u = Matrix::zeros(rows, n);
    let mut vt = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (slot, &j) in order.iter().enumerate() {
        singular_values.push(norms[j]);
        for i in 0..rows {
            u[(i, slot)] = u_cols[slot][i];
        }
        for i in 0..n {
            vt[(slot, i)] = v[j][i];
        }
    }
    Ok(SvdResult {
        u,
        singular_values,
        vt,
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed (zero) columns with unit vectors orthogonal to all others.
fn complete_orthonormal(cols: &mut [Vec<f64>], slots: &[usize]) {
    if slots.is_empty() {
        return;
    }
    let dim = cols[0].len();
    let mut candidate = 0;
    for &slot in slots {
        while candidate < dim {
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (k, col) in cols.iter().enumerate() {
                    if k == slot {
                        continue;
                    }
                    let proj = super::dot(col, &e);
                    for (ei, ci) in e.iter_mut().zip(col) {
                        *ei -= proj * ci;
                    }
                }
            }
            let n = super::norm(&e);
            if n > 1e-8 {
                cols[slot] = e.into_iter().map(|x| x / n).collect();
                break;
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eig(m: &Matrix) -> Result<EigResult> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "sym_eig",
            expected: m.rows(),
            actual: m.cols(),
        });
    }
    let asym = m.asymmetry();
    if asym > 1e-12 * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = m.rows();
    let mut a = m.sym();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            algorithm: "sym_eig",
            iterations: MAX_SWEEPS,
            rows: n,
            cols: n,
        });
    }

    let diag = a.diag();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let mut eigenvectors = Matrix::zeros(n, n);
    for (slot, &j) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, slot)] = v[(i, j)];
        }
    }
    Ok(EigResult {
        eigenvalues: order.iter().map(|&j| diag[j]).collect(),
        eigenvectors,
    })
}

/// QR factorization of a square matrix by modified Gram–Schmidt with one
/// reorthogonalization pass; `R` has a non-negative diagonal.
pub fn qr(m: &Matrix) -> Result<(Matrix, Matrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "qr",
            expected: m.rows(),
            actual: m.cols(),
        });
    }
    let n = m.rows();
    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = Matrix::zeros(n, n);
    for j in 0..n {
        let mut w = m.column(j);
        for _ in 0..2 {
            for (k, qk) in q_cols.iter().enumerate() {
                let proj = super::dot(qk, &w);
                r[(k, j)] += proj;
                for (wi, qi) in w.iter_mut().zip(qk) {
                    *wi -= proj * qi;
                }
            }
        }
        let norm = super::norm(&w);
        if norm == 0.0 {
            return Err(Error::InvalidParameter(
                "qr of a rank-deficient matrix".into(),
            ));
        }
        r[(j, j)] = norm;
        q_cols.push(w.into_iter().map(|x| x / norm).collect());
    }
    let mut q = Matrix::zeros(n, n);
    for (j, col) in q_cols.iter().enumerate() {
        for i in 0..n {
            q[(i, j)] = col[i];
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn svd_identity_and_diagonal() {
        let s = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(s.singular_values, vec![1.0, 1.0, 1.0]);
        let s = svd(&Matrix::from_diag(&[1.0, 3.0, 2.0])).unwrap();
        for (got, want) in s.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn svd_of_rotation_scaled() {
        // Singular values are the square roots of the eigenvalues of MᵀM = diag(0.25, 4).
        let m = Matrix::from_rows(&[&[0.0, 2.0], &[-0.5, 0.0]]);
        let s = svd(&m).unwrap();
        assert_abs_diff_eq!(s.singular_values[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.singular_values[1], 0.5, epsilon = 1e-14);
        let back = s.reconstruct();
        assert!(back.sub(&m).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn svd_rank_deficient_has_orthonormal_u() {
        let m = Matrix::from_rows(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let s = svd(&m).unwrap();
        assert_abs_diff_eq!(s.singular_values[0], 2.0, epsilon = 1e-14);
        let utu = s.u.transpose().matmul(&s.u).unwrap();
        assert!(utu.sub(&Matrix::identity(3)).unwrap().frobenius_norm() < 1e-12);
        assert!(s.reconstruct().sub(&m).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn svd_wide_matrix() {
        let m = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let s = svd(&m).unwrap();
        assert_eq!(s.u.rows(), 2);
        assert_eq!(s.vt.cols(), 3);
        assert!(s.reconstruct().sub(&m).unwrap().frobenius_norm() < 1e-13);
    }

    #[test]
    fn eig_examples() {
        let e = sym_eig(&Matrix::from_diag(&[2.0, -1.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![-1.0, 2.0]);
        let e = sym_eig(&Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 1.0, epsilon = 1e-14);
        let e = sym_eig(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e.eigenvalues, vec![0.0; 3]);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let m = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn qr_positive_diagonal() {
        let m = Matrix::from_rows(&[&[2.0, -1.0], &[1.0, 3.0]]);
        let (q, r) = qr(&m).unwrap();
        assert!(r[(0, 0)] > 0.0 && r[(1, 1)] > 0.0);
        assert_abs_diff_eq!(r[(1, 0)], 0.0);
        assert!(q.matmul(&r).unwrap().sub(&m).unwrap().frobenius_norm() < 1e-14);
    }
}
