//! Data-based codes from the normalized Laplacian of a class-similarity graph.
//!
//! Eigenvectors of `L = D^{-1/2} (D - W) D^{-1/2}` in ascending eigenvalue
//! order relax successively more expensive normalized cuts of the class
//! graph. Skipping the trivial eigenvector (eigenvalue 0), the next `k`
//! eigenvectors become the `k` code columns, kept real-valued.

use crate::codes::{Binarization, CodeKind, CodeMatrix};
use crate::eigen::{default_tolerance, symmetric_eigen};
use crate::error::{EcocError, Result};
use crate::matrix::Matrix;
use crate::scalar::{self, Scalar};

/// Loader tolerance for asymmetric similarity files.
pub const CSV_SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Entries at or below this magnitude are skipped when fixing eigenvector signs.
pub const SIGN_EPSILON: f64 = 1e-12;

/// Eigenvalues at or below this are treated as part of the null space.
pub const NULL_EIGENVALUE_TOLERANCE: f64 = 1e-9;

/// Symmetric, non-negative class-similarity matrix with a zero diagonal.
///
/// Node degrees are not required to be positive here; the Laplacian
/// rejects zero-degree nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph<T> {
    weights: Matrix<T>,
}

impl<T: Scalar> SimilarityGraph<T> {
    pub fn new(weights: Matrix<T>) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows != cols {
            return Err(EcocError::Shape(format!("similarity matrix must be square, got {rows}x{cols}")));
        }
        if rows < 2 {
            return Err(EcocError::InvalidClassCount(rows));
        }
        for i in 0..rows {
            if weights[(i, i)] != T::zero() {
                return Err(EcocError::InvalidGraph(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..rows {
                let w = weights[(i, j)];
                if !w.is_finite() || w < T::zero() {
                    return Err(EcocError::InvalidGraph(format!("entry ({i},{j}) = {w} is not a finite non-negative weight")));
                }
                if w != weights[(j, i)] {
                    return Err(EcocError::Asymmetry((w - weights[(j, i)]).abs().to_f64_lossy()));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn degrees(&self) -> Vec<T> {
        self.weights.iter_rows().map(|r| r.iter().copied().sum()).collect()
    }

    /// Parses `n` lines of `n` comma-separated weights.
    ///
    /// Pairs differing by more than [`CSV_SYMMETRY_TOLERANCE`] are rejected;
    /// the rest are averaged. Self-similarities on the diagonal are dropped.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<T>> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| {
                    c.trim().parse::<T>().map_err(|_| EcocError::Parse {
                        line: idx + 1,
                        msg: format!("non-numeric cell `{}`", c.trim()),
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(EcocError::Parse {
                        line: idx + 1,
                        msg: format!("expected {} values, found {}", first.len(), row.len()),
                    });
                }
            }
            rows.push(row);
        }
        let mut w = Matrix::from_rows(&rows)?;
        let n = w.rows();
        if w.cols() != n {
            return Err(EcocError::Shape(format!("similarity matrix must be square, got {n}x{}", w.cols())));
        }
        let tol = T::lit(CSV_SYMMETRY_TOLERANCE);
        for i in 0..n {
            w[(i, i)] = T::zero();
            for j in i + 1..n {
                let (a, b) = (w[(i, j)], w[(j, i)]);
                if (a - b).abs() > tol {
                    return Err(EcocError::Asymmetry((a - b).abs().to_f64_lossy()));
                }
                let avg = (a + b) / T::lit(2.0);
                w[(i, j)] = avg;
                w[(j, i)] = avg;
            }
        }
        Self::new(w)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for row in self.weights.iter_rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Class similarity `(1 + cos(mean_i, mean_j)) / 2` between per-class mean
/// feature vectors.
pub fn similarity_from_class_means<T: Scalar>(
    features: &Matrix<T>,
    labels: &[usize],
    n: usize,
) -> Result<SimilarityGraph<T>> {
    let p = features.cols();
    if p == 0 {
        return Err(EcocError::Shape("features need at least one column".into()));
    }
    if labels.len() != features.rows() {
        return Err(EcocError::Shape(format!("{} labels for {} samples", labels.len(), features.rows())));
    }
    let mut sums: Matrix<T> = Matrix::zeros(n, p);
    let mut counts = vec![0usize; n];
    for (x, &y) in features.iter_rows().zip(labels) {
        if y >= n {
            return Err(EcocError::Label { label: y, n });
        }
        counts[y] += 1;
        for (s, &v) in sums.row_mut(y).iter_mut().zip(x) {
            *s += v;
        }
    }
    let mut norms = Vec::with_capacity(n);
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(EcocError::MissingClass(c));
        }
        let inv = T::one() / T::from_count(count);
        sums.row_mut(c).iter_mut().for_each(|v| *v *= inv);
        let norm = scalar::norm2(sums.row(c));
        if norm <= T::zero() {
            return Err(EcocError::DegenerateFeature(c));
        }
        norms.push(norm);
    }
    let mut w = Matrix::zeros(n, n);
    let half = T::lit(0.5);
    for i in 0..n {
        for j in i + 1..n {
            let cos: T = (scalar::dot(sums.row(i), sums.row(j)) / (norms[i] * norms[j])).max(-T::one()).min(T::one());
            let s = (T::one() + cos) * half;
            w[(i, j)] = s;
            w[(j, i)] = s;
        }
    }
    SimilarityGraph::new(w)
}

/// `D^{-1/2} (D - W) D^{-1/2}`, exactly symmetric.
pub fn normalized_laplacian<T: Scalar>(g: &SimilarityGraph<T>) -> Result<Matrix<T>> {
    let n = g.n();
    let degrees = g.degrees();
    let mut inv_sqrt = Vec::with_capacity(n);
    for (i, &d) in degrees.iter().enumerate() {
        if d <= T::zero() {
            return Err(EcocError::SingularDegree(i));
        }
        inv_sqrt.push(T::one() / d.sqrt());
    }
    let w = g.weights();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        l[(i, i)] = (degrees[i] - w[(i, i)]) / degrees[i];
        for j in i + 1..n {
            let v = -w[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    Ok(l)
}

/// Code whose column `j` is Laplacian eigenvector `v_{j+1}`, skipping the
/// trivial `v_0`. Each column is sign-flipped so its first clearly nonzero
/// entry is positive.
pub fn spectral_code<T: Scalar>(g: &SimilarityGraph<T>, k: usize) -> Result<CodeMatrix<T>> {
    let n = g.n();
    if k == 0 {
        return Err(EcocError::InvalidCodeLength(0));
    }
    if k > n - 1 {
        return Err(EcocError::TooManyBits { k, max: n - 1 });
    }
    let laplacian = normalized_laplacian(g)?;
    let eig = symmetric_eigen(&laplacian, default_tolerance())?;
    let mut columns: Vec<Vec<T>> = (0..=k).map(|j| eig.eigenvector(j)).collect();
    let nullity = eig.eigenvalues.iter().take_while(|&&l| l <= T::lit(NULL_EIGENVALUE_TOLERANCE)).count();
    if nullity > 1 {
        let basis = null_space_basis(&g.degrees(), &eig, nullity);
        for (col, b) in columns.iter_mut().zip(basis) {
            *col = b;
        }
    }
    let mut values = Matrix::zeros(n, k);
    let eps = T::lit(SIGN_EPSILON);
    for j in 0..k {
        let col = &columns[j + 1];
        let flip = col.iter().find(|v| v.abs() > eps).is_some_and(|&v| v < T::zero());
        for (i, &v) in col.iter().enumerate() {
            values[(i, j)] = if flip { -v } else { v };
        }
    }
    CodeMatrix::new(values, CodeKind::Spectral, Binarization::Raw)
}

/// Orthonormal basis of a degenerate null space that starts with the
/// trivial eigenvector `D^{1/2} 1`, so the remaining vectors contrast the
/// graph's components instead of indicating single components.
fn null_space_basis<T: Scalar>(degrees: &[T], eig: &crate::eigen::EigenDecomposition<T>, nullity: usize) -> Vec<Vec<T>> {
    let mut trivial: Vec<T> = degrees.iter().map(|d| d.sqrt()).collect();
    let norm = scalar::norm2(&trivial);
    trivial.iter_mut().for_each(|v| *v /= norm);
    let mut basis = vec![trivial];
    for j in 0..nullity {
        if basis.len() == nullity {
            break;
        }
        let mut v = eig.eigenvector(j);
        for b in &basis {
            let proj = scalar::dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, &y)| *x -= proj * y);
        }
        let norm = scalar::norm2(&v);
        if norm > T::lit(1e-6) {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}
