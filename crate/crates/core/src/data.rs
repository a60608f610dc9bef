//! Datasets: synthetic hierarchical classes with planted attributes, CSV
//! loading and saving, and stratified splitting.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{EcocError, Result};
use crate::io::write_atomic;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Per-class binary attributes, one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    pub names: Vec<String>,
    pub values: Vec<Vec<bool>>,
}

impl AttributeTable {
    pub fn n_classes(&self) -> usize {
        self.values.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.names.len()
    }

    /// Attribute `a` across classes as 0/1.
    pub fn column<T: Scalar>(&self, a: usize) -> Vec<T> {
        self.values.iter().map(|r| if r[a] { T::one() } else { T::zero() }).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for row in &self.values {
            let cells: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(EcocError::Parse { line: 1, msg: "empty attribute file".into() })?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut values = Vec::new();
        for (idx, line) in lines {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != names.len() {
                return Err(EcocError::Parse {
                    line: idx + 1,
                    msg: format!("expected {} attributes, found {}", names.len(), cells.len()),
                });
            }
            let row = cells
                .iter()
                .map(|c| match *c {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(EcocError::Parse { line: idx + 1, msg: format!("attribute cell `{other}` is not 0/1") }),
                })
                .collect::<Result<Vec<bool>>>()?;
            values.push(row);
        }
        Ok(Self { names, values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Vec<usize>,
    n_classes: usize,
    attributes: Option<AttributeTable>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Matrix<T>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(EcocError::Shape(format!("{} labels for {} samples", labels.len(), features.rows())));
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(EcocError::Label { label, n: n_classes });
        }
        if !features.is_finite() {
            return Err(EcocError::Config("feature values must be finite".into()));
        }
        Ok(Self { features, labels, n_classes, attributes: None })
    }

    pub fn with_attributes(mut self, attributes: AttributeTable) -> Result<Self> {
        if attributes.n_classes() != self.n_classes {
            return Err(EcocError::Shape(format!(
                "attribute table has {} rows for {} classes",
                attributes.n_classes(),
                self.n_classes
            )));
        }
        self.attributes = Some(attributes);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn attributes(&self) -> Option<&AttributeTable> {
        self.attributes.as_ref()
    }

    pub fn sample(&self, i: usize) -> (&[T], usize) {
        (self.features.row(i), self.labels[i])
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let p = self.feature_dim();
        let features = Matrix::from_fn(indices.len(), p, |i, j| self.features[(indices[i], j)]);
        Self {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            attributes: self.attributes.clone(),
        }
    }

    /// One line per sample: the integer label followed by the features.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (x, y) in self.features.iter_rows().zip(&self.labels) {
            out.push_str(&y.to_string());
            for v in x {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Parses the dataset CSV. With `n_classes = None` the class count is
    /// one more than the largest label.
    pub fn from_csv_str(text: &str, n_classes: Option<usize>) -> Result<Self> {
        let mut labels = Vec::new();
        let mut data = Vec::new();
        let mut width = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() < 2 {
                return Err(EcocError::Parse { line: line_no, msg: "need a label and at least one feature".into() });
            }
            match width {
                None => width = Some(cells.len()),
                Some(w) if w != cells.len() => {
                    return Err(EcocError::Parse {
                        line: line_no,
                        msg: format!("expected {w} columns, found {}", cells.len()),
                    })
                }
                _ => {}
            }
            let label: usize = cells[0]
                .parse()
                .map_err(|_| EcocError::Parse { line: line_no, msg: format!("bad label `{}`", cells[0]) })?;
            if let Some(n) = n_classes {
                if label >= n {
                    return Err(EcocError::Parse { line: line_no, msg: format!("label {label} not below {n}") });
                }
            }
            for c in &cells[1..] {
                let v: T = c
                    .parse()
                    .map_err(|_| EcocError::Parse { line: line_no, msg: format!("non-numeric cell `{c}`") })?;
                if !v.is_finite() {
                    return Err(EcocError::Parse { line: line_no, msg: format!("non-finite value `{c}`") });
                }
                data.push(v);
            }
            labels.push(label);
        }
        let width = width.ok_or(EcocError::Parse { line: 1, msg: "no samples".into() })?;
        let n = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        let features = Matrix::from_vec(labels.len(), width - 1, data)?;
        Self::new(features, labels, n)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())
    }
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, n_classes: Option<usize>) -> Result<Dataset<T>> {
    Dataset::from_csv_str(&fs::read_to_string(path)?, n_classes)
}

pub fn save_csv<T: Scalar>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    dataset.save_csv(path)
}

/// Parameters of the synthetic hierarchical generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub depth: usize,
    pub branching: usize,
    pub samples_per_class: usize,
    pub class_sep: f64,
    pub noise_sigma: f64,
    pub dim: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn n_classes(&self) -> usize {
        self.branching.pow(self.depth as u32)
    }
}

/// Classes are the leaves of a complete tree of the given depth and
/// branching factor. Walking down, each level adds an offset of length
/// `class_sep * 2^-level` (level 0 below the root) in a fresh random
/// direction. Samples are the leaf center plus isotropic Gaussian noise.
///
/// Attribute columns follow the internal nodes in breadth-first order; a
/// class has attribute 1 iff it descends from that node's first child.
pub fn synth_hierarchical<T: Scalar>(cfg: &SynthConfig) -> Result<Dataset<T>> {
    if cfg.depth < 1 || cfg.branching < 2 {
        return Err(EcocError::Config("synthetic data needs depth >= 1 and branching >= 2".into()));
    }
    if cfg.dim < cfg.depth {
        return Err(EcocError::Config(format!("feature dimension {} is below depth {}", cfg.dim, cfg.depth)));
    }
    if cfg.samples_per_class < 1 {
        return Err(EcocError::Config("samples_per_class must be at least 1".into()));
    }
    if !(cfg.class_sep > 0.0 && cfg.class_sep.is_finite()) {
        return Err(EcocError::Config("class_sep must be positive".into()));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(EcocError::Config("noise_sigma must be non-negative".into()));
    }
    let n = cfg
        .branching
        .checked_pow(cfg.depth as u32)
        .filter(|&n| n <= 1 << 20)
        .ok_or_else(|| EcocError::Config("tree has too many leaves".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centers: Vec<Vec<f64>> = vec![vec![0.0; cfg.dim]];
    for level in 0..cfg.depth {
        let step = cfg.class_sep * 0.5f64.powi(level as i32);
        let mut next = Vec::with_capacity(centers.len() * cfg.branching);
        for parent in &centers {
            for _ in 0..cfg.branching {
                let dir = random_unit(&mut rng, cfg.dim);
                next.push(parent.iter().zip(&dir).map(|(c, d)| c + step * d).collect());
            }
        }
        centers = next;
    }

    let s = n * cfg.samples_per_class;
    let mut data = Vec::with_capacity(s * cfg.dim);
    let mut labels = Vec::with_capacity(s);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..cfg.samples_per_class {
            for &mu in center {
                let e: f64 = StandardNormal.sample(&mut rng);
                data.push(T::lit(mu + cfg.noise_sigma * e));
            }
            labels.push(c);
        }
    }

    let mut names = Vec::new();
    let mut columns = Vec::new();
    for level in 0..cfg.depth {
        let below = cfg.branching.pow((cfg.depth - level) as u32);
        let child_span = below / cfg.branching;
        for node in 0..cfg.branching.pow(level as u32) {
            names.push(format!("split_{level}_{node}"));
            columns.push((0..n).map(|c| c / below == node && (c % below) / child_span == 0).collect::<Vec<bool>>());
        }
    }
    let values = (0..n).map(|c| columns.iter().map(|col| col[c]).collect()).collect();

    Dataset::new(Matrix::from_vec(s, cfg.dim, data)?, labels, n)?.with_attributes(AttributeTable { names, values })
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Stratified split: within each class a seeded shuffle sends
/// `round(fraction * count)` samples to train (at least one to each side).
pub fn split<T: Scalar>(dataset: &Dataset<T>, train_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EcocError::Config(format!("train fraction {train_fraction} must lie strictly between 0 and 1")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (c, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(EcocError::Stratification(c));
        }
        idx.shuffle(&mut rng);
        let take = ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..take]);
        eval.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&eval)))
}
