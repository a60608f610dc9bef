//! Post-training analyses: confusion matrices, bit ablation, correlation of
//! code bits with class attributes, and the batch-to-class ratio.

use crate::codes::CodeMatrix;
use crate::data::{AttributeTable, Dataset};
use crate::decoder;
use crate::error::{EcocError, Result};
use crate::nn::NetParams;
use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.n()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Header of predicted class ids, then one row of counts per true class.
    pub fn to_csv_string(&self) -> String {
        let header: Vec<String> = (0..self.n()).map(|j| j.to_string()).collect();
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.counts {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], n: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(EcocError::Shape(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    let mut counts = vec![vec![0usize; n]; n];
    for (&p, &y) in preds.iter().zip(labels) {
        for id in [p, y] {
            if id >= n {
                return Err(EcocError::Label { label: id, n });
            }
        }
        counts[y][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Pearson correlation coefficient.
pub fn pcc<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(EcocError::Shape(format!("pcc needs two equal-length vectors of length >= 2, got {} and {}", xs.len(), ys.len())));
    }
    let (mx, my) = (scalar::mean(xs), scalar::mean(ys));
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Err(EcocError::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeCorrelation<T> {
    /// 1-based code column.
    pub bit: usize,
    pub attribute: usize,
    pub name: String,
    pub r: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport<T> {
    /// Grouped by bit; within a bit, by descending `|r|`.
    pub rows: Vec<AttributeCorrelation<T>>,
    /// Attributes constant across classes, for which `r` is undefined.
    pub skipped_attributes: Vec<usize>,
    /// Constant code columns (1-based).
    pub skipped_bits: Vec<usize>,
}

impl<T: Scalar> CorrelationReport<T> {
    /// Strongest attribute for a 1-based bit.
    pub fn top(&self, bit: usize) -> Option<&AttributeCorrelation<T>> {
        self.rows.iter().find(|r| r.bit == bit)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("bit,attribute,r\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.11e}\n", r.bit, r.name, r.r.to_f64_lossy()));
        }
        out
    }
}

/// Pearson correlation of every code column with every class attribute.
pub fn attribute_correlation<T: Scalar>(code: &CodeMatrix<T>, attributes: &AttributeTable) -> Result<CorrelationReport<T>> {
    if attributes.n_classes() != code.n() {
        return Err(EcocError::Shape(format!(
            "attribute table has {} rows, code has {}",
            attributes.n_classes(),
            code.n()
        )));
    }
    let columns: Vec<Option<Vec<T>>> = (0..attributes.n_attributes())
        .map(|a| {
            let col = attributes.column::<T>(a);
            let first = col[0];
            col.iter().any(|&v| v != first).then_some(col)
        })
        .collect();
    let skipped_attributes = columns.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(a, _)| a).collect();
    let mut rows = Vec::new();
    let mut skipped_bits = Vec::new();
    for j in 0..code.k() {
        let bit = code.values().column(j);
        let mut per_bit = Vec::new();
        for (a, col) in columns.iter().enumerate() {
            let Some(col) = col else { continue };
            match pcc(&bit, col) {
                Ok(r) => per_bit.push(AttributeCorrelation { bit: j + 1, attribute: a, name: attributes.names[a].clone(), r }),
                Err(EcocError::UndefinedCorrelation) => {
                    skipped_bits.push(j + 1);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        per_bit.sort_by(|x, y| y.r.abs().partial_cmp(&x.r.abs()).expect("finite correlations"));
        rows.extend(per_bit);
    }
    Ok(CorrelationReport { rows, skipped_attributes, skipped_bits })
}

/// Decoded class of every sample.
pub fn predictions<T: Scalar>(params: &NetParams<T>, data: &Dataset<T>, code: &CodeMatrix<T>) -> Result<Vec<usize>> {
    (0..data.len()).map(|i| decoder::predict(&params.output(data.sample(i).0)?, code)).collect()
}

pub fn accuracy<T: Scalar>(params: &NetParams<T>, data: &Dataset<T>, code: &CodeMatrix<T>) -> Result<f64> {
    let preds = predictions(params, data, code)?;
    let correct = preds.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / data.len() as f64)
}

/// Accuracy when decoding with only the first `j` output coordinates and code
/// columns, for each `j` in `js`.
///
/// The truncated output is re-normalized; the code rows are the decoding
/// rows of the full code cut to `j` columns. A truncated output that is
/// exactly zero yields no prediction and counts as an error.
pub fn bit_ablation<T: Scalar>(
    params: &NetParams<T>,
    data: &Dataset<T>,
    code: &CodeMatrix<T>,
    js: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if params.output_dim() != code.k() {
        return Err(EcocError::Shape(format!("network emits {} values, code has {} bits", params.output_dim(), code.k())));
    }
    if data.n_classes() != code.n() {
        return Err(EcocError::Shape(format!("dataset has {} classes, code has {}", data.n_classes(), code.n())));
    }
    if let Some(&j) = js.iter().find(|&&j| j == 0 || j > code.k()) {
        return Err(EcocError::TooManyBits { k: j, max: code.k() });
    }
    let outputs = (0..data.len()).map(|i| params.output(data.sample(i).0)).collect::<Result<Vec<_>>>()?;
    js.iter()
        .map(|&j| {
            let rows = code.decode_rows().truncate_cols(j);
            let mut correct = 0usize;
            for (z, &y) in outputs.iter().zip(data.labels()) {
                match decoder::predict_with_rows(&z[..j], &rows) {
                    Ok(p) if p == y => correct += 1,
                    Ok(_) | Err(EcocError::ZeroVector(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok((j, correct as f64 / data.len() as f64))
        })
        .collect()
}

pub fn ablation_csv(rows: &[(usize, f64)]) -> String {
    let mut out = String::from("bits,accuracy\n");
    for (j, acc) in rows {
        out.push_str(&format!("{j},{acc:.11e}\n"));
    }
    out
}

/// `batch_size / n`: roughly the chance that a given class's output unit
/// sees a positive example in one SGD step.
pub fn sparsity_ratio(batch_size: usize, n: usize) -> f64 {
    assert!(batch_size >= 1 && n >= 1, "batch size and class count must be positive");
    batch_size as f64 / n as f64
}
