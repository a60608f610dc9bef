use std::io;

use thiserror::Error;

pub type Result<T, E = EcocError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EcocError {
    #[error("invalid class count {0}: at least 2 classes are required")]
    InvalidClassCount(usize),

    #[error("invalid code length {0}: at least 1 bit is required")]
    InvalidCodeLength(usize),

    #[error("invalid code matrix: {0}")]
    InvalidCode(String),

    #[error("code rows {0} and {1} are identical")]
    DuplicateRows(usize, usize),

    #[error("code generation failed: {0}")]
    CodeGeneration(String),

    #[error("binarization collapses rows {0} and {1}; use raw values or more bits")]
    BinarizationCollision(usize, usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("vector norm {0:e} is at or below the normalization guard")]
    ZeroVector(f64),

    #[error("label {label} is out of range for {n} classes")]
    Label { label: usize, n: usize },

    #[error("matrix is not symmetric (max deviation {0:e})")]
    Asymmetry(f64),

    #[error("Jacobi iteration did not converge within {0} sweeps")]
    Convergence(usize),

    #[error("similarity graph node {0} has non-positive degree")]
    SingularDegree(usize),

    #[error("invalid similarity graph: {0}")]
    InvalidGraph(String),

    #[error("requested {k} bits but at most {max} are available")]
    TooManyBits { k: usize, max: usize },

    #[error("class {0} has no samples")]
    MissingClass(usize),

    #[error("class {0} has a zero-norm mean feature vector")]
    DegenerateFeature(usize),

    #[error("correlation is undefined for a zero-variance vector")]
    UndefinedCorrelation,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("class {0} has too few samples to appear in both splits")]
    Stratification(usize),

    #[error("training diverged at epoch {0}")]
    TrainingDiverged(usize),

    #[error(transparent)]
    Io(#[from] io::Error),
}
