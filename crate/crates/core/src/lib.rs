//! Low-dimensional error-correcting output code (ECOC) embeddings for
//! training neural classifiers.
//!
//! Instead of an `n`-way one-hot softmax, a network emits a `k`-dimensional
//! vector that is normalized and decoded against an `n x k` code matrix
//! through a softmax over negative squared distances. Codes can be one-hot,
//! Gaussian, dense random, or spectral (eigenvectors of the normalized
//! Laplacian of a class-similarity graph).
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision types the CLI uses.
//!
//! ```
//! use ecoc::codes::gaussian_code;
//! use ecoc::data::{split, synth_hierarchical, SynthConfig};
//! use ecoc::nn::{train, NetParams, TrainConfig};
//!
//! # fn main() -> ecoc::Result<()> {
//! let cfg = SynthConfig { depth: 3, branching: 2, samples_per_class: 20, class_sep: 4.0, noise_sigma: 1.0, dim: 16, seed: 0 };
//! let data = synth_hierarchical::<f64>(&cfg)?;
//! let (tr, ev) = split(&data, 0.5, 0)?;
//! let code = gaussian_code::<f64>(data.n_classes(), 8, 0)?;
//! let net = NetParams::init(&[tr.feature_dim(), 32, 8], 0)?;
//! let train_cfg = TrainConfig { epochs: 30, learning_rate: 5.0, ..TrainConfig::default() };
//! let outcome = train(net, &tr, Some(&ev), &code, &train_cfg)?;
//! assert_eq!(outcome.metrics.len(), 30);
//! # Ok(())
//! # }
//! ```

pub mod analysis;
pub mod cli;
pub mod codes;
pub mod data;
pub mod decoder;
pub mod eigen;
pub mod error;
pub mod io;
pub mod matrix;
pub mod nn;
pub mod scalar;
pub mod spectral;

pub use codes::{Binarization, CodeKind};
pub use error::{EcocError, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

pub type CodeMatrix = codes::CodeMatrix<f64>;
pub type Dataset = data::Dataset<f64>;
pub type DecoderLossResult = decoder::DecoderLossResult<f64>;
pub type EigenDecomposition = eigen::EigenDecomposition<f64>;
pub type NetParams = nn::NetParams<f64>;
pub type SimilarityGraph = spectral::SimilarityGraph<f64>;
pub type Mat = matrix::Matrix<f64>;

pub type CodeMatrix32 = codes::CodeMatrix<f32>;
pub type Dataset32 = data::Dataset<f32>;
pub type NetParams32 = nn::NetParams<f32>;
