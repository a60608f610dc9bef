#![allow(dead_code)]

use ecoc::cli::config::ExperimentConfig;
use ecoc::codes::{dense_random_code, gaussian_code, one_hot, CodeKind, CodeMatrix};
use ecoc::decoder;
use ecoc::matrix::Matrix;
use ecoc::nn::NetParams;
use ecoc::spectral::{spectral_code, SimilarityGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Denominator floor for the per-coordinate relative error, so coordinates
/// that are analytically zero compare on an absolute scale.
pub const FD_ABS_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_ABS_FLOOR)
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(&a, &n)| rel_err(a, n)).fold(0.0, f64::max)
}

/// Central differences of the decoder loss with respect to `z`.
pub fn fd_decoder_grad(z: &[f64], code: &CodeMatrix<f64>, y: usize) -> Vec<f64> {
    let loss = |z: &[f64]| decoder::forward(z, code, y).unwrap().loss;
    (0..z.len())
        .map(|i| {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[i] += FD_STEP;
            zm[i] -= FD_STEP;
            (loss(&zp) - loss(&zm)) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Mean decoder loss of the network over `(x, y)` pairs.
pub fn net_loss(params: &NetParams<f64>, code: &CodeMatrix<f64>, batch: &[(Vec<f64>, usize)]) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|(x, y)| decoder::forward(&params.output(x).unwrap(), code, *y).unwrap().loss)
        .sum();
    total / batch.len() as f64
}

/// Central difference of [`net_loss`] with respect to one parameter, addressed
/// as (layer, flat index over weights then biases).
pub fn fd_net_coordinate(params: &NetParams<f64>, code: &CodeMatrix<f64>, batch: &[(Vec<f64>, usize)], layer: usize, idx: usize) -> f64 {
    let nudge = |delta: f64| {
        let mut p = params.clone();
        let l = &mut p.layers[layer];
        let nw = l.weights.as_slice().len();
        if idx < nw {
            l.weights.as_mut_slice()[idx] += delta;
        } else {
            l.bias[idx - nw] += delta;
        }
        net_loss(&p, code, batch)
    };
    (nudge(FD_STEP) - nudge(-FD_STEP)) / (2.0 * FD_STEP)
}

/// Symmetric matrix with i.i.d. uniform entries in [-1, 1].
pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.random_range(-1.0..=1.0);
            m.as_mut_slice()[i * n + j] = v;
            m.as_mut_slice()[j * n + i] = v;
        }
    }
    m
}

/// Dense similarity graph with weights uniform in (0.05, 1).
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> SimilarityGraph<f64> {
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.random_range(0.05..1.0);
            w.as_mut_slice()[i * n + j] = v;
            w.as_mut_slice()[j * n + i] = v;
        }
    }
    SimilarityGraph::new(w).unwrap()
}

/// Two planted blocks: strong weights inside a block, weak across.
pub fn planted_two_block(rng: &mut ChaCha8Rng, sizes: (usize, usize)) -> (SimilarityGraph<f64>, Vec<bool>) {
    let n = sizes.0 + sizes.1;
    let block: Vec<bool> = (0..n).map(|i| i < sizes.0).collect();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = if block[i] == block[j] { rng.random_range(0.7..1.0) } else { rng.random_range(0.0..0.1) };
            w.as_mut_slice()[i * n + j] = v;
            w.as_mut_slice()[j * n + i] = v;
        }
    }
    (SimilarityGraph::new(w).unwrap(), block)
}

/// A code of the requested kind; `k` is adjusted where the kind constrains it
/// (one-hot needs `k = n`, spectral needs `k < n`, and dense codes get at
/// least `2 log2 n` bits so random sign rows are distinct in practice).
pub fn any_code(kind: CodeKind, n: usize, k: usize, seed: u64) -> CodeMatrix<f64> {
    match kind {
        CodeKind::OneHot => one_hot(n).unwrap(),
        CodeKind::Gaussian => gaussian_code(n, k, seed).unwrap(),
        CodeKind::DenseRandom => {
            let min_bits = usize::BITS as usize - (n - 1).leading_zeros() as usize;
            dense_random_code(n, k.max(2 * min_bits), 200, seed).unwrap()
        }
        CodeKind::Spectral => spectral_code(&random_graph(&mut rng(seed), n), k.min(n - 1)).unwrap(),
    }
}

pub const ALL_KINDS: [CodeKind; 4] = [CodeKind::OneHot, CodeKind::Gaussian, CodeKind::DenseRandom, CodeKind::Spectral];

/// The planted hierarchical task shared by the accuracy comparisons: 16
/// classes from a depth-4 binary tree, one hidden layer, SGD to convergence.
pub const PLANTED_PROTOCOL: &str = "\
data.source = synthetic
data.depth = 4
data.branching = 2
data.samples_per_class = 40
data.class_sep = 8.0
data.noise_sigma = 1.0
data.dim = 16
data.train_fraction = 0.5
net.hidden = 64
train.epochs = 100
train.batch_size = 32
train.learning_rate = 10.0
train.lr_decay_epoch = 70
train.lr_decay_factor = 0.1
";

/// Protocol text with every seed set to `seed`, followed by `extra` lines.
pub fn seeded(protocol: &str, seed: u64, extra: &str) -> ExperimentConfig {
    let text = format!(
        "{protocol}data.seed = {seed}\ndata.split_seed = {seed}\ncode.seed = {seed}\nnet.seed = {seed}\ntrain.seed = {seed}\n{extra}\n"
    );
    ExperimentConfig::parse(&text).unwrap()
}
