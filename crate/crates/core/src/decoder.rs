//! Distance-decoder softmax head.
//!
//! The network output `z` is projected onto the unit sphere, `U = z/||z||`,
//! scored against every codeword `m_i` by `D_i = -1/2 ||m_i - U||^2`, and the
//! scores go through a softmax and cross-entropy. The backward pass chains
//! the three Jacobians
//!
//! ```text
//! dJ/dD = p - e_y,   dD_i/dU = m_i - U,   dU/dz = (I - U Uᵀ) / ||z||
//! ```
//!
//! so that `grad_z = -[(e_y - p)ᵀ (M - 1Uᵀ)] (I - UUᵀ) / ||z||`. This is the
//! gradient of the loss; descend along `-grad_z`.

use crate::codes::CodeMatrix;
use crate::error::{EcocError, Result};
use crate::matrix::Matrix;
use crate::scalar::{self, Scalar};

/// Outputs with an L2 norm at or below this are rejected.
pub const NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLossResult<T> {
    pub loss: T,
    pub probs: Vec<T>,
    /// Empty until [`backward`] has run.
    pub grad_z: Vec<T>,
}

impl<T: Scalar> DecoderLossResult<T> {
    /// Most probable class, smallest id on ties.
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

pub fn normalize<T: Scalar>(z: &[T]) -> Result<Vec<T>> {
    let norm = scalar::norm2(z);
    if !(norm > T::lit(NORM_GUARD)) {
        return Err(EcocError::ZeroVector(norm.to_f64_lossy()));
    }
    Ok(z.iter().map(|&v| v / norm).collect())
}

/// Negative half squared distance from `u` to every decoding row of `code`.
pub fn distances<T: Scalar>(u: &[T], code: &CodeMatrix<T>) -> Result<Vec<T>> {
    distances_to_rows(u, code.decode_rows())
}

pub(crate) fn distances_to_rows<T: Scalar>(u: &[T], rows: &Matrix<T>) -> Result<Vec<T>> {
    if u.len() != rows.cols() {
        return Err(EcocError::Shape(format!("output has {} coordinates, code has {} bits", u.len(), rows.cols())));
    }
    let half = T::lit(0.5);
    Ok(rows
        .iter_rows()
        .map(|m| {
            let sq = m.iter().zip(u).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
            -half * sq
        })
        .collect())
}

/// Max-shifted softmax.
pub fn decoder_softmax<T: Scalar>(d: &[T]) -> Vec<T> {
    let max = d.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = d.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_label(y: usize, n: usize) -> Result<()> {
    if y >= n {
        return Err(EcocError::Label { label: y, n });
    }
    Ok(())
}

/// Loss and class probabilities; `grad_z` is left empty.
pub fn forward<T: Scalar>(z: &[T], code: &CodeMatrix<T>, y: usize) -> Result<DecoderLossResult<T>> {
    check_label(y, code.n())?;
    let u = normalize(z)?;
    let probs = decoder_softmax(&distances(&u, code)?);
    let loss = -probs[y].ln();
    Ok(DecoderLossResult { loss, probs, grad_z: Vec::new() })
}

/// Gradient of `-ln probs[y]` with respect to `z`.
pub fn backward<T: Scalar>(z: &[T], code: &CodeMatrix<T>, y: usize, probs: &[T]) -> Result<Vec<T>> {
    check_label(y, code.n())?;
    if probs.len() != code.n() {
        return Err(EcocError::Shape(format!("{} probabilities for {} classes", probs.len(), code.n())));
    }
    let norm = scalar::norm2(z);
    let u = normalize(z)?;
    if u.len() != code.k() {
        return Err(EcocError::Shape(format!("output has {} coordinates, code has {} bits", u.len(), code.k())));
    }
    let rows = code.decode_rows();
    let k = u.len();

    // dJ/dU_j = sum_i (p_i - [i = y]) (m_ij - U_j)
    let mut grad_u = vec![T::zero(); k];
    for (i, m) in rows.iter_rows().enumerate() {
        let coeff = if i == y { probs[i] - T::one() } else { probs[i] };
        if coeff == T::zero() {
            continue;
        }
        for j in 0..k {
            grad_u[j] += coeff * (m[j] - u[j]);
        }
    }
    // (I - UUᵀ) grad_u / ||z||
    let radial = scalar::dot(&u, &grad_u);
    Ok(grad_u.iter().zip(&u).map(|(&g, &uj)| (g - radial * uj) / norm).collect())
}

/// Forward and backward in one call.
pub fn loss_and_grad<T: Scalar>(z: &[T], code: &CodeMatrix<T>, y: usize) -> Result<DecoderLossResult<T>> {
    let mut out = forward(z, code, y)?;
    out.grad_z = backward(z, code, y, &out.probs)?;
    Ok(out)
}

/// Nearest codeword to the normalized output; smallest class id on ties.
pub fn predict<T: Scalar>(z: &[T], code: &CodeMatrix<T>) -> Result<usize> {
    predict_with_rows(z, code.decode_rows())
}

pub(crate) fn predict_with_rows<T: Scalar>(z: &[T], rows: &Matrix<T>) -> Result<usize> {
    let u = normalize(z)?;
    Ok(argmax(&distances_to_rows(&u, rows)?))
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
