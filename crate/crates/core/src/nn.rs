//! Small fully connected network (rectifier hidden layers, identity output)
//! and a mini-batch SGD trainer driven by the decoder loss.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::codes::CodeMatrix;
use crate::data::Dataset;
use crate::decoder;
use crate::error::{EcocError, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// An output-layer gradient coordinate counts as "nonzero" above this magnitude.
pub const GRAD_NONZERO_THRESHOLD: f64 = 1e-8;

const MODEL_MAGIC: &[u8; 8] = b"ECOCNET\0";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    /// `out x in`.
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    fn zeros_like(&self) -> Self {
        Self { weights: Matrix::zeros(self.weights.rows(), self.weights.cols()), bias: vec![T::zero(); self.bias.len()] }
    }

    fn values(&self) -> impl Iterator<Item = &T> {
        self.weights.as_slice().iter().chain(&self.bias)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weights.as_mut_slice().iter_mut().chain(self.bias.iter_mut())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    pub layers: Vec<Layer<T>>,
}

/// Activations retained by [`NetParams::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input fed to each layer.
    inputs: Vec<Vec<T>>,
    /// Pre-activation of each layer; the last one is the output `z`.
    pre: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.pre.last().expect("network has at least one layer")
    }
}

/// Parameter gradients, laid out like [`NetParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Gradients<T> {
    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.values_mut().zip(b.values()).for_each(|(x, &y)| *x += y);
        }
    }

    fn scale(&mut self, s: T) {
        self.layers.iter_mut().for_each(|l| l.values_mut().for_each(|x| *x *= s));
    }

    /// Fraction of output-layer coordinates (weights and biases) whose
    /// magnitude exceeds [`GRAD_NONZERO_THRESHOLD`].
    pub fn output_nonzero_ratio(&self) -> f64 {
        let last = self.layers.last().expect("network has at least one layer");
        nonzero_ratio(last.values())
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(Layer::values)
    }
}

fn nonzero_ratio<'a, T: Scalar>(values: impl Iterator<Item = &'a T>) -> f64 {
    let threshold = T::lit(GRAD_NONZERO_THRESHOLD);
    let (mut hits, mut total) = (0usize, 0usize);
    for v in values {
        total += 1;
        if v.abs() > threshold {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

impl<T: Scalar> NetParams<T> {
    /// Weights drawn from `N(0, 1/fan_in)`, zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(EcocError::Config("a network needs at least input and output sizes".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(EcocError::Config("layer sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = (1.0 / fan_in as f64).sqrt();
                let weights = Matrix::from_fn(fan_out, fan_in, |_, _| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    T::lit(std * e)
                });
                Layer { weights, bias: vec![T::zero(); fan_out] }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(EcocError::Config("a network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.rows() {
                return Err(EcocError::Shape(format!("layer {i}: bias length differs from output size")));
            }
            if i > 0 && l.weights.cols() != layers[i - 1].weights.rows() {
                return Err(EcocError::Shape(format!("layer {i} input does not match layer {} output", i - 1)));
            }
        }
        Ok(Self { layers })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weights.rows()));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("network has at least one layer").weights.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.values().all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &[T]) -> Result<ForwardCache<T>> {
        if x.len() != self.input_dim() {
            return Err(EcocError::Shape(format!("input has {} features, network expects {}", x.len(), self.input_dim())));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.mul_vec(&current)?;
            z.iter_mut().zip(&layer.bias).for_each(|(v, &b)| *v += b);
            let next = if i == last { Vec::new() } else { z.iter().map(|&v| v.max(T::zero())).collect() };
            inputs.push(std::mem::replace(&mut current, next));
            pre.push(z);
        }
        Ok(ForwardCache { inputs, pre })
    }

    pub fn output(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(x)?.pre.pop().expect("network has at least one layer"))
    }

    /// Backpropagates `grad_z` (gradient of the loss w.r.t. the output).
    pub fn backward(&self, cache: &ForwardCache<T>, grad_z: &[T]) -> Result<Gradients<T>> {
        if grad_z.len() != self.output_dim() || cache.pre.len() != self.layers.len() {
            return Err(EcocError::Shape("gradient or cache does not match the network".into()));
        }
        let mut grads: Vec<Layer<T>> = self.layers.iter().map(Layer::zeros_like).collect();
        let mut delta = grad_z.to_vec();
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            let g = &mut grads[i];
            for (r, &d) in delta.iter().enumerate() {
                g.bias[r] = d;
                if d == T::zero() {
                    continue;
                }
                for (w, &a) in g.weights.row_mut(r).iter_mut().zip(input) {
                    *w = d * a;
                }
            }
            if i > 0 {
                let w = &self.layers[i].weights;
                let below = &cache.pre[i - 1];
                delta = (0..w.cols())
                    .map(|c| {
                        if below[c] > T::zero() {
                            (0..w.rows()).fold(T::zero(), |acc, r| acc + w[(r, c)] * delta[r])
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
            }
        }
        Ok(Gradients { layers: grads })
    }

    fn step(&mut self, update: &Gradients<T>, lr: T) {
        for (l, g) in self.layers.iter_mut().zip(&update.layers) {
            l.values_mut().zip(g.values()).for_each(|(p, &d)| *p -= lr * d);
        }
    }

    /// Little-endian model dump: magic, version, layer sizes, then every
    /// layer's weights (row-major) followed by its biases, as `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.layer_sizes();
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in &sizes {
            out.extend_from_slice(&(*s as u64).to_le_bytes());
        }
        for v in self.layers.iter().flat_map(Layer::values) {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| EcocError::Parse { line: 0, msg: format!("model file: {msg}") };
        let mut cursor = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(bad("truncated"));
            }
            let (head, tail) = cursor.split_at(n);
            cursor = tail;
            Ok(head)
        };
        if take(8)? != MODEL_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        if version != MODEL_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        if count < 2 {
            return Err(bad("fewer than two layer sizes"));
        }
        let mut sizes = Vec::with_capacity(count);
        for _ in 0..count {
            let s = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
            if s == 0 || s > 1 << 24 {
                return Err(bad("implausible layer size"));
            }
            sizes.push(s);
        }
        let mut layers = Vec::with_capacity(count - 1);
        for w in sizes.windows(2) {
            let mut read = |len: usize| -> Result<Vec<T>> {
                (0..len).map(|_| Ok(T::lit(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"))))).collect()
            };
            let weights = Matrix::from_vec(w[1], w[0], read(w[0] * w[1])?)?;
            let bias = read(w[1])?;
            layers.push(Layer { weights, bias });
        }
        if !cursor.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Self::from_layers(layers)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiply the learning rate by `lr_decay_factor` every this many epochs.
    pub lr_decay_epoch: Option<usize>,
    pub lr_decay_factor: f64,
    /// Classical momentum; 0 is plain SGD.
    pub momentum: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 0.1,
            lr_decay_epoch: None,
            lr_decay_factor: 0.1,
            momentum: 0.0,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(EcocError::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EcocError::Config("learning_rate must be positive".into()));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(EcocError::Config("lr_decay_factor must lie in (0, 1]".into()));
        }
        if self.lr_decay_epoch == Some(0) {
            return Err(EcocError::Config("lr_decay_epoch must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(EcocError::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (1-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_decay_epoch {
            Some(every) => self.learning_rate * self.lr_decay_factor.powi(((epoch - 1) / every) as i32),
            None => self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub grad_nonzero_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train: SplitMetrics,
    pub eval: Option<SplitMetrics>,
}

/// Renders `epoch,split,loss,accuracy,grad_nonzero_ratio` rows.
pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,split,loss,accuracy,grad_nonzero_ratio\n");
    let mut push = |epoch: usize, split: &str, m: &SplitMetrics| {
        out.push_str(&format!(
            "{epoch},{split},{:.11e},{:.11e},{:.11e}\n",
            m.loss, m.accuracy, m.grad_nonzero_ratio
        ));
    };
    for r in rows {
        push(r.epoch, "train", &r.train);
        if let Some(e) = &r.eval {
            push(r.epoch, "eval", e);
        }
    }
    out
}

/// Mean decoder loss, accuracy and output-layer gradient density of `params`
/// on `data`, without updating anything. Density is averaged over
/// consecutive batches of `batch_size` samples.
pub fn evaluate<T: Scalar>(
    params: &NetParams<T>,
    data: &Dataset<T>,
    code: &CodeMatrix<T>,
    batch_size: usize,
) -> Result<SplitMetrics> {
    check_compat(params, data, code)?;
    if data.is_empty() {
        return Err(EcocError::Config("cannot evaluate an empty dataset".into()));
    }
    let batch_size = batch_size.max(1);
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut ratio_sum = 0.0;
    let mut batches = 0usize;
    let order: Vec<usize> = (0..data.len()).collect();
    for chunk in order.chunks(batch_size) {
        let last = params.layers.last().expect("network has at least one layer");
        let mut out_grad = last.zeros_like();
        for &i in chunk {
            let (x, y) = data.sample(i);
            let cache = params.forward(x)?;
            let r = decoder::loss_and_grad(cache.output(), code, y)?;
            loss_sum += r.loss.to_f64_lossy();
            if decoder::predict(cache.output(), code)? == y {
                correct += 1;
            }
            let hidden = cache.inputs.last().expect("network has at least one layer");
            for (row, &d) in r.grad_z.iter().enumerate() {
                out_grad.bias[row] += d;
                for (w, &a) in out_grad.weights.row_mut(row).iter_mut().zip(hidden) {
                    *w += d * a;
                }
            }
        }
        let inv = T::one() / T::from_count(chunk.len());
        out_grad.values_mut().for_each(|v| *v *= inv);
        ratio_sum += nonzero_ratio(out_grad.values());
        batches += 1;
    }
    Ok(SplitMetrics {
        loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
        grad_nonzero_ratio: ratio_sum / batches as f64,
    })
}

fn check_compat<T: Scalar>(params: &NetParams<T>, data: &Dataset<T>, code: &CodeMatrix<T>) -> Result<()> {
    if data.n_classes() != code.n() {
        return Err(EcocError::Shape(format!("dataset has {} classes, code has {}", data.n_classes(), code.n())));
    }
    if params.output_dim() != code.k() {
        return Err(EcocError::Shape(format!("network emits {} values, code has {} bits", params.output_dim(), code.k())));
    }
    if params.input_dim() != data.feature_dim() {
        return Err(EcocError::Shape(format!(
            "network expects {} features, dataset has {}",
            params.input_dim(),
            data.feature_dim()
        )));
    }
    Ok(())
}

/// Mean loss and gradient over the samples at `indices`, accumulated in order.
pub fn batch_gradient<T: Scalar>(
    params: &NetParams<T>,
    data: &Dataset<T>,
    code: &CodeMatrix<T>,
    indices: &[usize],
) -> Result<(T, Gradients<T>)> {
    let mut total: Option<Gradients<T>> = None;
    let mut loss = T::zero();
    for &i in indices {
        let (x, y) = data.sample(i);
        let cache = params.forward(x)?;
        let r = decoder::loss_and_grad(cache.output(), code, y)?;
        loss += r.loss;
        let g = params.backward(&cache, &r.grad_z)?;
        match total.as_mut() {
            Some(t) => t.add_assign(&g),
            None => total = Some(g),
        }
    }
    let mut total = total.ok_or_else(|| EcocError::Config("empty batch".into()))?;
    let inv = T::one() / T::from_count(indices.len());
    total.scale(inv);
    Ok((loss * inv, total))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: NetParams<T>,
    pub metrics: Vec<EpochMetrics>,
}

/// Mini-batch SGD on the mean decoder loss.
///
/// Shuffling is seeded by `(cfg.seed, epoch)`, so a run is a pure function
/// of its inputs. A non-finite loss or parameter, or a collapsed (zero)
/// network output after the first update, aborts with
/// [`EcocError::TrainingDiverged`].
pub fn train<T: Scalar>(
    mut params: NetParams<T>,
    train_set: &Dataset<T>,
    eval_set: Option<&Dataset<T>>,
    code: &CodeMatrix<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    check_compat(&params, train_set, code)?;
    if let Some(e) = eval_set {
        check_compat(&params, e, code)?;
    }
    if train_set.is_empty() {
        return Err(EcocError::Config("training set is empty".into()));
    }
    // a degenerate initial network is a configuration problem, not divergence
    decoder::normalize(&params.output(train_set.sample(0).0)?)?;

    let diverged = |epoch: usize| move |e: EcocError| match e {
        EcocError::ZeroVector(_) => EcocError::TrainingDiverged(epoch),
        other => other,
    };
    let mut velocity: Option<Gradients<T>> = None;
    let momentum = T::lit(cfg.momentum);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        if cfg.shuffle {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(epoch as u64);
            order.shuffle(&mut rng);
        }
        let lr = T::lit(cfg.learning_rate_at(epoch));
        let mut ratio_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_gradient(&params, train_set, code, chunk).map_err(diverged(epoch))?;
            if !loss.is_finite() {
                return Err(EcocError::TrainingDiverged(epoch));
            }
            ratio_sum += grads.output_nonzero_ratio();
            batches += 1;
            let update = match velocity.as_mut() {
                Some(v) if cfg.momentum > 0.0 => {
                    v.scale(momentum);
                    v.add_assign(&grads);
                    v.clone()
                }
                _ => {
                    if cfg.momentum > 0.0 {
                        velocity = Some(grads.clone());
                    }
                    grads
                }
            };
            params.step(&update, lr);
            if !params.is_finite() {
                return Err(EcocError::TrainingDiverged(epoch));
            }
        }
        let mut train_metrics = evaluate(&params, train_set, code, cfg.batch_size).map_err(diverged(epoch))?;
        if !train_metrics.loss.is_finite() {
            return Err(EcocError::TrainingDiverged(epoch));
        }
        train_metrics.grad_nonzero_ratio = ratio_sum / batches as f64;
        let eval = eval_set.map(|e| evaluate(&params, e, code, cfg.batch_size).map_err(diverged(epoch))).transpose()?;
        metrics.push(EpochMetrics { epoch, train: train_metrics, eval });
    }
    Ok(TrainOutcome { params, metrics })
}
