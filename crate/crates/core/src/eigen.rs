//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use crate::error::{EcocError, Result};
use crate::matrix::Matrix;
use crate::scalar::{self, Scalar};

pub const MAX_SWEEPS: usize = 100;

/// Inputs whose transpose differs by more than this (relative to
/// `max(1, ||A||_F)`) are rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// Column `i` is the unit eigenvector paired with `eigenvalues[i]`.
    pub eigenvectors: Matrix<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    pub fn eigenvector(&self, i: usize) -> Vec<T> {
        self.eigenvectors.column(i)
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let v = &self.eigenvectors;
        let n = v.rows();
        Matrix::from_fn(n, n, |i, j| {
            (0..n).fold(T::zero(), |acc, l| acc + v[(i, l)] * self.eigenvalues[l] * v[(j, l)])
        })
    }
}

/// Convergence threshold suited to the scalar's precision.
pub fn default_tolerance<T: Scalar>() -> T {
    T::epsilon() * T::lit(64.0)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps visit the strict upper triangle in row-major order. Iteration
/// stops once the off-diagonal Frobenius norm drops below `tol * ||a||_F`.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>, tol: T) -> Result<EigenDecomposition<T>> {
    let (rows, cols) = a.shape();
    if rows != cols || rows == 0 {
        return Err(EcocError::Shape(format!("eigendecomposition needs a non-empty square matrix, got {rows}x{cols}")));
    }
    if !a.is_finite() {
        return Err(EcocError::Shape("matrix has non-finite entries".into()));
    }
    let n = rows;
    let scale = a.frobenius_norm();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > T::lit(SYMMETRY_TOLERANCE) * scale.max(T::one()) {
        return Err(EcocError::Asymmetry(worst.to_f64_lossy()));
    }

    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let threshold = tol * scale;
    let mut converged = false;
    for _ in 0..=MAX_SWEEPS {
        if off_diagonal_norm(&m) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(EcocError::Convergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].partial_cmp(&m[(y, y)]).expect("finite eigenvalues"));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let mut eigenvectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    for j in 0..n {
        let col = eigenvectors.column(j);
        let norm = scalar::norm2(&col);
        for i in 0..n {
            eigenvectors[(i, j)] /= norm;
        }
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

fn off_diagonal_norm<T: Scalar>(m: &Matrix<T>) -> T {
    let n = m.rows();
    let mut sum = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += m[(i, j)] * m[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Applies the rotation that annihilates `m[p][q]`, accumulating it into `v`.
fn rotate<T: Scalar>(m: &mut Matrix<T>, v: &mut Matrix<T>, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == T::zero() {
        return;
    }
    let two = T::lit(2.0);
    let theta = (m[(q, q)] - m[(p, p)]) / (two * apq);
    let t = if theta.abs() > T::lit(1e15) {
        T::one() / (two * theta)
    } else {
        let t = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
        if theta < T::zero() {
            -t
        } else {
            t
        }
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;
    let n = m.rows();
    for k in 0..n {
        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = T::zero();
    m[(q, p)] = T::zero();
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
