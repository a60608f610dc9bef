//! Code matrices: one codeword (row) per class, one bi-partition (column) per bit.
//!
//! Data-independent generators live here (one-hot, Gaussian, dense random);
//! the data-based spectral generator is in [`crate::spectral`].

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{EcocError, Result};
use crate::matrix::Matrix;
use crate::scalar::{self, Scalar};

/// Candidate count used by [`dense_random_code`] when the caller has no preference.
pub const DEFAULT_DENSE_CANDIDATES: usize = 10_000;

const GAUSSIAN_MAX_RETRIES: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeKind {
    OneHot,
    Gaussian,
    DenseRandom,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binarization {
    Raw,
    Zero,
    Median,
}

impl CodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodeKind::OneHot => "onehot",
            CodeKind::Gaussian => "gaussian",
            CodeKind::DenseRandom => "dense",
            CodeKind::Spectral => "spectral",
        }
    }
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodeKind {
    type Err = EcocError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "onehot" | "one-hot" => Ok(CodeKind::OneHot),
            "gaussian" => Ok(CodeKind::Gaussian),
            "dense" | "dense-random" | "denserandom" => Ok(CodeKind::DenseRandom),
            "spectral" | "data" | "data-based" => Ok(CodeKind::Spectral),
            other => Err(EcocError::Config(format!("unknown code kind `{other}`"))),
        }
    }
}

impl Binarization {
    pub fn as_str(self) -> &'static str {
        match self {
            Binarization::Raw => "raw",
            Binarization::Zero => "zero",
            Binarization::Median => "median",
        }
    }
}

impl fmt::Display for Binarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Binarization {
    type Err = EcocError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" | "none" | "-" => Ok(Binarization::Raw),
            "zero" => Ok(Binarization::Zero),
            "median" => Ok(Binarization::Median),
            other => Err(EcocError::Config(format!("unknown binarization `{other}`"))),
        }
    }
}

/// An `n x k` target embedding.
///
/// Besides the raw values the matrix carries the rows actually used for
/// decoding. When `normalize_rows` is on those are the L2-normalized rows,
/// so every class can reach the same best distance to a unit-norm output.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeMatrix<T> {
    values: Matrix<T>,
    kind: CodeKind,
    binarization: Binarization,
    normalize_rows: bool,
    decode_rows: Matrix<T>,
}

impl<T: Scalar> CodeMatrix<T> {
    /// Validates `values` and wraps them with the default row-normalization
    /// for the given kind and binarization.
    pub fn new(values: Matrix<T>, kind: CodeKind, binarization: Binarization) -> Result<Self> {
        validate_values(&values, kind, binarization)?;
        let normalize_rows = default_normalize_rows(kind, binarization);
        let decode_rows = build_decode_rows(&values, kind, normalize_rows)?;
        Ok(Self { values, kind, binarization, normalize_rows, decode_rows })
    }

    pub fn with_normalize_rows(mut self, on: bool) -> Result<Self> {
        if on != self.normalize_rows {
            self.decode_rows = build_decode_rows(&self.values, self.kind, on)?;
            self.normalize_rows = on;
        }
        Ok(self)
    }

    /// Number of classes.
    #[inline]
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    /// Number of bits.
    #[inline]
    pub fn k(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn codeword(&self, class: usize) -> &[T] {
        self.values.row(class)
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn binarization(&self) -> Binarization {
        self.binarization
    }

    pub fn normalize_rows(&self) -> bool {
        self.normalize_rows
    }

    /// Rows compared against the network output during decoding.
    pub fn decode_rows(&self) -> &Matrix<T> {
        &self.decode_rows
    }

    pub fn is_binary(&self) -> bool {
        is_pm_one(&self.values) || is_zero_one(&self.values)
    }

    /// Serializes to the code CSV format: a `n,k,kind,binarization` line
    /// followed by one comma-separated line per codeword.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("{},{},{},{}\n", self.n(), self.k(), self.kind, self.binarization);
        for row in self.values.iter_rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) =
            lines.next().ok_or(EcocError::Parse { line: 1, msg: "empty code file".into() })?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(EcocError::Parse {
                line: 1,
                msg: format!("expected `n,k,kind,binarization`, got `{header}`"),
            });
        }
        let parse_count = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| EcocError::Parse { line: 1, msg: format!("bad count `{s}`") })
        };
        let n = parse_count(fields[0])?;
        let k = parse_count(fields[1])?;
        let kind: CodeKind =
            fields[2].parse().map_err(|e: EcocError| EcocError::Parse { line: 1, msg: e.to_string() })?;
        let binarization: Binarization =
            fields[3].parse().map_err(|e: EcocError| EcocError::Parse { line: 1, msg: e.to_string() })?;

        let mut data = Vec::with_capacity(n * k);
        let mut rows = 0;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != k {
                return Err(EcocError::Parse {
                    line: line_no,
                    msg: format!("expected {k} values, found {}", cells.len()),
                });
            }
            for c in cells {
                let v = c.parse::<T>().map_err(|_| EcocError::Parse {
                    line: line_no,
                    msg: format!("non-numeric cell `{c}`"),
                })?;
                data.push(v);
            }
            rows += 1;
        }
        if rows != n {
            return Err(EcocError::Parse {
                line: rows + 1,
                msg: format!("header declares {n} rows, found {rows}"),
            });
        }
        Self::new(Matrix::from_vec(n, k, data)?, kind, binarization)
    }
}

fn default_normalize_rows(kind: CodeKind, binarization: Binarization) -> bool {
    matches!(kind, CodeKind::Spectral | CodeKind::Gaussian) && binarization == Binarization::Raw
}

fn is_pm_one<T: Scalar>(m: &Matrix<T>) -> bool {
    m.as_slice().iter().all(|&v| v == T::one() || v == -T::one())
}

fn is_zero_one<T: Scalar>(m: &Matrix<T>) -> bool {
    m.as_slice().iter().all(|&v| v == T::one() || v == T::zero())
}

fn validate_values<T: Scalar>(values: &Matrix<T>, kind: CodeKind, binarization: Binarization) -> Result<()> {
    let (n, k) = values.shape();
    if n < 2 {
        return Err(EcocError::InvalidClassCount(n));
    }
    if k < 1 {
        return Err(EcocError::InvalidCodeLength(k));
    }
    if !values.is_finite() {
        return Err(EcocError::InvalidCode("non-finite entry".into()));
    }
    if kind == CodeKind::OneHot {
        if k != n {
            return Err(EcocError::InvalidCode(format!("one-hot code needs k = n, got k={k}, n={n}")));
        }
        if !is_zero_one(values) {
            return Err(EcocError::InvalidCode("one-hot entries must be 0 or 1".into()));
        }
        if values.iter_rows().any(|r| r.iter().copied().sum::<T>() != T::one()) {
            return Err(EcocError::InvalidCode("one-hot rows must sum to 1".into()));
        }
    }
    let must_be_signs = binarization != Binarization::Raw || kind == CodeKind::DenseRandom;
    if must_be_signs && !is_pm_one(values) {
        return Err(EcocError::InvalidCode(format!(
            "{kind} code with {binarization} binarization must hold only -1/+1"
        )));
    }
    check_distinct(values, kind)
}

/// Raw spectral codes may legitimately repeat rows: classes that sit in the
/// same component of a disconnected graph share their low eigenvectors.
fn check_distinct<T: Scalar>(values: &Matrix<T>, kind: CodeKind) -> Result<()> {
    match first_duplicate_row(values) {
        Some((a, b)) if kind != CodeKind::Spectral => Err(EcocError::DuplicateRows(a, b)),
        _ => Ok(()),
    }
}

fn build_decode_rows<T: Scalar>(values: &Matrix<T>, kind: CodeKind, normalize: bool) -> Result<Matrix<T>> {
    if !normalize {
        return Ok(values.clone());
    }
    let guard = T::lit(crate::decoder::NORM_GUARD);
    let mut rows = values.clone();
    for i in 0..rows.rows() {
        let norm = scalar::norm2(rows.row(i));
        if norm <= guard {
            return Err(EcocError::InvalidCode(format!("row {i} has zero norm and cannot be normalized")));
        }
        rows.row_mut(i).iter_mut().for_each(|v| *v /= norm);
    }
    match first_duplicate_row(&rows) {
        Some((a, b)) if kind != CodeKind::Spectral => Err(EcocError::InvalidCode(format!(
            "rows {a} and {b} coincide after row normalization; use more bits or turn normalization off"
        ))),
        _ => Ok(rows),
    }
}

fn first_duplicate_row<T: Scalar>(m: &Matrix<T>) -> Option<(usize, usize)> {
    for a in 0..m.rows() {
        for b in a + 1..m.rows() {
            if m.row(a) == m.row(b) {
                return Some((a, b));
            }
        }
    }
    None
}

pub fn one_hot<T: Scalar>(n: usize) -> Result<CodeMatrix<T>> {
    if n < 2 {
        return Err(EcocError::InvalidClassCount(n));
    }
    CodeMatrix::new(Matrix::identity(n), CodeKind::OneHot, Binarization::Raw)
}

/// `n x k` matrix of i.i.d. standard normal entries.
///
/// A draw with duplicate rows is retried with the next seed, at most ten times.
pub fn gaussian_code<T: Scalar>(n: usize, k: usize, seed: u64) -> Result<CodeMatrix<T>> {
    check_dims(n, k)?;
    for attempt in 0..=GAUSSIAN_MAX_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let values = Matrix::from_fn(n, k, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            T::lit(x)
        });
        match CodeMatrix::new(values, CodeKind::Gaussian, Binarization::Raw) {
            Err(EcocError::DuplicateRows(..)) => continue,
            other => return other,
        }
    }
    Err(EcocError::CodeGeneration(format!(
        "gaussian sampling produced duplicate rows after {GAUSSIAN_MAX_RETRIES} retries"
    )))
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if n < 2 {
        return Err(EcocError::InvalidClassCount(n));
    }
    if k < 1 {
        return Err(EcocError::InvalidCodeLength(k));
    }
    Ok(())
}

/// Floor of `10 * log2(n)`, the dense-random rule of thumb for code length.
pub fn default_code_length(n: usize) -> usize {
    // 10*log2(2^m) must not round below 10*m
    let exact = 10.0 * (n as f64).log2();
    let rounded = exact.round();
    if (exact - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        exact.floor() as usize
    }
}

/// Random {-1,+1} matrix stored as one bitset per row (bit set = +1).
struct SignBits {
    n: usize,
    k: usize,
    row_words: usize,
    rows: Vec<u64>,
}

impl SignBits {
    fn sample(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Self {
        let row_words = k.div_ceil(64);
        let mut rows = Vec::with_capacity(n * row_words);
        for _ in 0..n {
            for w in 0..row_words {
                let used = (k - w * 64).min(64);
                let mask = if used == 64 { u64::MAX } else { (1u64 << used) - 1 };
                rows.push(rng.next_u64() & mask);
            }
        }
        Self { n, k, row_words, rows }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.row_words..(i + 1) * self.row_words]
    }

    fn bit(&self, i: usize, j: usize) -> bool {
        self.row(i)[j / 64] >> (j % 64) & 1 == 1
    }

    fn min_row_hamming(&self) -> usize {
        let mut best = usize::MAX;
        for a in 0..self.n {
            for b in a + 1..self.n {
                let d: u32 = self.row(a).iter().zip(self.row(b)).map(|(x, y)| (x ^ y).count_ones()).sum();
                best = best.min(d as usize);
                if best == 0 {
                    return 0;
                }
            }
        }
        best
    }

    fn max_abs_col_corr(&self) -> f64 {
        if self.k < 2 {
            return 0.0;
        }
        let col_words = self.n.div_ceil(64);
        let mut cols = vec![0u64; self.k * col_words];
        for i in 0..self.n {
            for j in 0..self.k {
                if self.bit(i, j) {
                    cols[j * col_words + i / 64] |= 1 << (i % 64);
                }
            }
        }
        let col = |j: usize| &cols[j * col_words..(j + 1) * col_words];
        let n = self.n as f64;
        let ones: Vec<f64> = (0..self.k).map(|j| col(j).iter().map(|w| w.count_ones()).sum::<u32>() as f64).collect();
        let mut worst = 0.0f64;
        for a in 0..self.k {
            for b in a + 1..self.k {
                let disagree: u32 = col(a).iter().zip(col(b)).map(|(x, y)| (x ^ y).count_ones()).sum();
                let dot = n - 2.0 * disagree as f64;
                let ma = (2.0 * ones[a] - n) / n;
                let mb = (2.0 * ones[b] - n) / n;
                worst = worst.max(pm_one_association(dot / n, ma, mb).abs());
            }
        }
        worst
    }

    fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_fn(self.n, self.k, |i, j| if self.bit(i, j) { T::one() } else { -T::one() })
    }
}

/// Pearson correlation of two ±1 vectors from their mean product and means,
/// falling back to the uncentered value when a vector is constant.
fn pm_one_association(mean_product: f64, ma: f64, mb: f64) -> f64 {
    let va = 1.0 - ma * ma;
    let vb = 1.0 - mb * mb;
    if va <= 0.0 || vb <= 0.0 {
        mean_product
    } else {
        (mean_product - ma * mb) / (va * vb).sqrt()
    }
}

/// Every candidate matrix [`dense_random_code`] inspects for the same
/// arguments, in order.
pub fn dense_random_candidates<T: Scalar>(
    n: usize,
    k: usize,
    candidates: usize,
    seed: u64,
) -> impl Iterator<Item = Matrix<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..candidates).map(move |_| SignBits::sample(n, k, &mut rng).to_matrix())
}

/// Picks, among `candidates` uniformly random sign matrices, the one with the
/// largest minimum row Hamming distance. Ties go to the smaller maximum
/// absolute column correlation, then to the earlier candidate.
pub fn dense_random_code<T: Scalar>(n: usize, k: usize, candidates: usize, seed: u64) -> Result<CodeMatrix<T>> {
    check_dims(n, k)?;
    if candidates < 1 {
        return Err(EcocError::Config("dense random code needs at least one candidate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, f64, SignBits)> = None;
    for _ in 0..candidates {
        let cand = SignBits::sample(n, k, &mut rng);
        let hamming = cand.min_row_hamming();
        if hamming == 0 {
            continue;
        }
        let replace = match &best {
            None => true,
            Some((h, _, _)) if hamming > *h => true,
            Some((h, corr, _)) if hamming == *h => cand.max_abs_col_corr() < *corr,
            _ => false,
        };
        if replace {
            let corr = cand.max_abs_col_corr();
            best = Some((hamming, corr, cand));
        }
    }
    let (_, _, bits) = best.ok_or_else(|| {
        EcocError::CodeGeneration(format!("none of {candidates} candidates has pairwise distinct rows"))
    })?;
    CodeMatrix::new(bits.to_matrix(), CodeKind::DenseRandom, Binarization::Raw)
}

/// Thresholds every entry to -1/+1.
///
/// `Zero` maps positive entries to +1. `Median` compares each entry with its
/// row's median and maps entries at or above it to +1.
pub fn binarize<T: Scalar>(code: &CodeMatrix<T>, strategy: Binarization) -> Result<CodeMatrix<T>> {
    if strategy == Binarization::Raw {
        return Err(EcocError::Config("binarize needs the zero or median strategy".into()));
    }
    if code.kind() == CodeKind::OneHot {
        return Err(EcocError::Config("one-hot codes cannot be re-binarized to signs".into()));
    }
    let mut values = code.values().clone();
    for i in 0..values.rows() {
        let threshold = match strategy {
            Binarization::Median => Some(median(values.row(i))),
            _ => None,
        };
        for v in values.row_mut(i) {
            let positive = match threshold {
                Some(m) => *v >= m,
                None => *v > T::zero(),
            };
            *v = if positive { T::one() } else { -T::one() };
        }
    }
    if let Some((a, b)) = first_duplicate_row(&values) {
        return Err(EcocError::BinarizationCollision(a, b));
    }
    CodeMatrix::new(values, code.kind(), strategy)
}

fn median<T: Scalar>(row: &[T]) -> T {
    let mut sorted = row.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite code values"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / T::lit(2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeMetrics<T> {
    /// Only defined for binary (±1 or 0/1) codes.
    pub min_row_hamming: Option<usize>,
    pub max_abs_row_corr: T,
    pub max_abs_col_corr: T,
    /// Mean of each column.
    pub column_balance: Vec<T>,
}

pub fn code_metrics<T: Scalar>(code: &CodeMatrix<T>) -> CodeMetrics<T> {
    let values = code.values();
    let (n, k) = values.shape();
    let min_row_hamming = code.is_binary().then(|| {
        let mut best = usize::MAX;
        for a in 0..n {
            for b in a + 1..n {
                let d = values.row(a).iter().zip(values.row(b)).filter(|(x, y)| x != y).count();
                best = best.min(d);
            }
        }
        best
    });
    let max_pair = |vectors: &[Vec<T>]| {
        let mut worst = T::zero();
        for a in 0..vectors.len() {
            for b in a + 1..vectors.len() {
                worst = worst.max(association(&vectors[a], &vectors[b]).abs());
            }
        }
        worst
    };
    let rows: Vec<Vec<T>> = values.iter_rows().map(<[T]>::to_vec).collect();
    let cols: Vec<Vec<T>> = (0..k).map(|j| values.column(j)).collect();
    CodeMetrics {
        min_row_hamming,
        max_abs_row_corr: max_pair(&rows),
        max_abs_col_corr: max_pair(&cols),
        column_balance: cols.iter().map(|c| scalar::mean(c)).collect(),
    }
}

/// Pearson correlation, or cosine similarity when either vector is constant.
fn association<T: Scalar>(a: &[T], b: &[T]) -> T {
    match crate::analysis::pcc(a, b) {
        Ok(r) => r,
        Err(_) => {
            let denom = scalar::norm2(a) * scalar::norm2(b);
            if denom > T::zero() {
                scalar::dot(a, b) / denom
            } else {
                T::zero()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(rows: &[&[f64]], kind: CodeKind, b: Binarization) -> CodeMatrix<f64> {
        CodeMatrix::new(Matrix::from_rows(rows).unwrap(), kind, b).unwrap()
    }

    #[test]
    fn one_hot_is_identity() {
        let c = one_hot::<f64>(3).unwrap();
        assert_eq!(c.values().as_slice(), Matrix::<f64>::identity(3).as_slice());
        assert_eq!(c.kind(), CodeKind::OneHot);
        let c2 = one_hot::<f64>(2).unwrap();
        assert_eq!(c2.values().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(one_hot::<f64>(1), Err(EcocError::InvalidClassCount(1))));
    }

    #[test]
    fn one_hot_rows_orthogonal_and_two_apart() {
        for n in 2..12 {
            let c = one_hot::<f64>(n).unwrap();
            for a in 0..n {
                for b in a + 1..n {
                    assert_eq!(scalar::dot(c.codeword(a), c.codeword(b)), 0.0);
                }
            }
            assert_eq!(code_metrics(&c).min_row_hamming, Some(2));
        }
    }

    #[test]
    fn gaussian_is_deterministic() {
        let a = gaussian_code::<f64>(4, 3, 7).unwrap();
        let b = gaussian_code::<f64>(4, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values().shape(), (4, 3));
        assert!(a.normalize_rows());
        assert_ne!(a, gaussian_code::<f64>(4, 3, 8).unwrap());
        assert!(matches!(gaussian_code::<f64>(1, 3, 0), Err(EcocError::InvalidClassCount(1))));
    }

    #[test]
    fn gaussian_sample_mean_near_zero() {
        let c = gaussian_code::<f64>(100, 66, 3).unwrap();
        let m = scalar::mean(c.values().as_slice());
        let bound = 5.0 / ((100.0 * 66.0) as f64).sqrt();
        assert!(m.abs() < bound, "mean {m} outside ±{bound}");
    }

    #[test]
    fn default_code_length_values() {
        assert_eq!(default_code_length(100), 66);
        assert_eq!(default_code_length(2), 10);
        assert_eq!(default_code_length(200), (10.0 * 200f64.log2()).floor() as usize);
        assert_eq!(default_code_length(200), 76);
        assert_eq!(default_code_length(1024), 100);
    }

    #[test]
    fn dense_two_classes_one_bit() {
        let c = dense_random_code::<f64>(2, 1, 100, 5).unwrap();
        let mut rows: Vec<f64> = c.values().as_slice().to_vec();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, vec![-1.0, 1.0]);
        assert_eq!(c.kind(), CodeKind::DenseRandom);
        assert!(!c.normalize_rows());
    }

    #[test]
    fn dense_failure_when_rows_cannot_differ() {
        // 3 classes cannot get distinct 1-bit codewords
        assert!(matches!(dense_random_code::<f64>(3, 1, 50, 0), Err(EcocError::CodeGeneration(_))));
    }

    #[test]
    fn dense_large_has_distinct_rows() {
        let c = dense_random_code::<f64>(100, 66, 200, 1).unwrap();
        assert!(code_metrics(&c).min_row_hamming.unwrap() >= 1);
    }

    #[test]
    fn binarize_zero_and_median() {
        let c = code(&[&[0.1, -0.5, 0.9], &[-0.3, 0.2, 0.4]], CodeKind::Gaussian, Binarization::Raw);
        let z = binarize(&c, Binarization::Zero).unwrap();
        assert_eq!(z.codeword(0), &[1.0, -1.0, 1.0]);
        assert_eq!(z.binarization(), Binarization::Zero);
        assert!(!z.normalize_rows());

        let c = code(&[&[0.1, 0.5, 0.9], &[0.3, 0.2, 0.1]], CodeKind::Spectral, Binarization::Raw);
        let m = binarize(&c, Binarization::Median).unwrap();
        assert_eq!(m.codeword(0), &[-1.0, 1.0, 1.0]);
        assert_eq!(m.codeword(1), &[1.0, 1.0, -1.0]);
    }

    #[test]
    fn binarize_even_length_median_is_midpoint() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn binarize_collision() {
        let c = code(&[&[0.1, -0.5], &[0.7, -0.2]], CodeKind::Gaussian, Binarization::Raw);
        assert!(matches!(binarize(&c, Binarization::Zero), Err(EcocError::BinarizationCollision(0, 1))));
    }

    #[test]
    fn binarize_binary_is_fixed_point() {
        let c = dense_random_code::<f64>(6, 5, 50, 2).unwrap();
        let again = binarize(&c, Binarization::Zero).unwrap();
        assert_eq!(again.values(), c.values());
        let g = gaussian_code::<f64>(8, 10, 4).unwrap();
        let once = binarize(&g, Binarization::Median).unwrap();
        let twice = binarize(&once, Binarization::Zero).unwrap();
        assert_eq!(once.values(), twice.values());
    }

    #[test]
    fn metrics_examples() {
        let c = code(&[&[1.0, 1.0], &[-1.0, -1.0]], CodeKind::DenseRandom, Binarization::Raw);
        let m = code_metrics(&c);
        assert!((m.max_abs_row_corr - 1.0).abs() < 1e-12);
        assert_eq!(m.min_row_hamming, Some(2));

        let c = code(&[&[1.0, 1.0], &[1.0, -1.0]], CodeKind::DenseRandom, Binarization::Raw);
        assert_eq!(code_metrics(&c).column_balance[0], 1.0);
        assert_eq!(code_metrics(&c).column_balance[1], 0.0);

        let g = gaussian_code::<f64>(5, 4, 0).unwrap();
        assert_eq!(code_metrics(&g).min_row_hamming, None);
    }

    #[test]
    fn invalid_codes_rejected() {
        let dup = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(
            CodeMatrix::new(dup, CodeKind::Gaussian, Binarization::Raw),
            Err(EcocError::DuplicateRows(0, 1))
        ));
        let nan = Matrix::from_rows(&[[1.0, f64::NAN], [1.0, 2.0]]).unwrap();
        assert!(CodeMatrix::new(nan, CodeKind::Gaussian, Binarization::Raw).is_err());
        let not_signs = Matrix::from_rows(&[[1.0, 0.5], [1.0, -1.0]]).unwrap();
        assert!(CodeMatrix::new(not_signs, CodeKind::Gaussian, Binarization::Zero).is_err());
        // proportional rows collapse once normalized
        let prop = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(
            CodeMatrix::new(prop, CodeKind::Gaussian, Binarization::Raw),
            Err(EcocError::InvalidCode(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let c = dense_random_code::<f64>(5, 7, 30, 9).unwrap();
        let back = CodeMatrix::<f64>::from_csv_str(&c.to_csv_string()).unwrap();
        assert_eq!(back, c);
        let g = gaussian_code::<f64>(4, 3, 1).unwrap();
        assert_eq!(CodeMatrix::<f64>::from_csv_str(&g.to_csv_string()).unwrap(), g);
        assert!(c.to_csv_string().starts_with("5,7,dense,raw\n"));
    }

    #[test]
    fn csv_errors_name_line() {
        let err = CodeMatrix::<f64>::from_csv_str("2,2,gaussian,raw\n1,2\n3\n").unwrap_err();
        assert!(matches!(err, EcocError::Parse { line: 3, .. }), "{err}");
        let err = CodeMatrix::<f64>::from_csv_str("2,2,gaussian,raw\n1,x\n3,4\n").unwrap_err();
        assert!(matches!(err, EcocError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn works_in_single_precision() {
        let c = gaussian_code::<f32>(6, 4, 2).unwrap();
        assert_eq!(c.values().shape(), (6, 4));
        let d = dense_random_code::<f32>(6, 4, 20, 2).unwrap();
        assert!(code_metrics(&d).min_row_hamming.unwrap() >= 1);
    }
}
