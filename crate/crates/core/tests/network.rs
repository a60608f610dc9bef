mod common;

use common::*;
use ecoc::codes::{gaussian_code, one_hot, CodeMatrix};
use ecoc::data::Dataset;
use ecoc::decoder;
use ecoc::matrix::Matrix;
use ecoc::nn::{batch_gradient, evaluate, metrics_csv, train, Layer, NetParams, TrainConfig};
use ecoc::EcocError;
use rand::Rng;

/// Four well-separated square clusters in the plane, one per class.
fn separable_four(per_class: usize, seed: u64) -> Dataset<f64> {
    let mut rng = rng(seed);
    let corners = [(3.0, 3.0), (-3.0, 3.0), (-3.0, -3.0), (3.0, -3.0)];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, (cx, cy)) in corners.iter().enumerate() {
        for _ in 0..per_class {
            rows.push([cx + rng.random_range(-1.0..1.0), cy + rng.random_range(-1.0..1.0)]);
            labels.push(c);
        }
    }
    Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, 4).unwrap()
}

/// Three overlapping Gaussian blobs in 3 dimensions.
fn overlapping(per_class: usize, seed: u64) -> Dataset<f64> {
    let mut rng = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3 {
        for _ in 0..per_class {
            let mut x = normal_vec(&mut rng, 3);
            x[c] += 1.0;
            rows.push(x);
            labels.push(c);
        }
    }
    Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, 3).unwrap()
}

#[test]
fn init_examples() {
    let p = NetParams::<f64>::init(&[4, 8, 3], 5).unwrap();
    assert_eq!(p.layer_sizes(), vec![4, 8, 3]);
    assert_eq!(p.layers[0].weights.shape(), (8, 4));
    assert_eq!(p.layers[1].weights.shape(), (3, 8));
    assert_eq!(p, NetParams::<f64>::init(&[4, 8, 3], 5).unwrap());
    assert_ne!(p, NetParams::<f64>::init(&[4, 8, 3], 6).unwrap());
    assert!(matches!(NetParams::<f64>::init(&[4], 0), Err(EcocError::Config(_))));
    assert!(NetParams::<f64>::init(&[], 0).is_err());
}

#[test]
fn init_variance_follows_fan_in() {
    let p = NetParams::<f64>::init(&[200, 300], 1).unwrap();
    let w = p.layers[0].weights.as_slice();
    let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    assert!((var - 1.0 / 200.0).abs() < 0.1 / 200.0, "variance {var}");
    assert!(p.layers[0].bias.iter().all(|&b| b == 0.0));
}

#[test]
fn forward_examples() {
    let bias_only = NetParams::from_layers(vec![Layer { weights: Matrix::zeros(2, 3), bias: vec![0.5, -2.0] }]).unwrap();
    assert_eq!(bias_only.output(&[1.0, 2.0, 3.0]).unwrap(), vec![0.5, -2.0]);

    let w = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
    let linear = NetParams::from_layers(vec![Layer { weights: w, bias: vec![1.0, 0.0] }]).unwrap();
    assert_eq!(linear.output(&[2.0, 1.0]).unwrap(), vec![5.0, 5.0]);

    let hidden = Layer { weights: Matrix::from_rows(&[[-1.0, 0.0], [0.0, -1.0]]).unwrap(), bias: vec![0.0, 0.0] };
    let out = Layer { weights: Matrix::from_rows(&[[1.0, 1.0]]).unwrap(), bias: vec![0.25] };
    let relu = NetParams::from_layers(vec![hidden, out]).unwrap();
    assert_eq!(relu.output(&[3.0, 4.0]).unwrap(), vec![0.25]);
    assert!(matches!(relu.output(&[1.0]), Err(EcocError::Shape(_))));
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradients() {
    let p = NetParams::<f64>::init(&[3, 5, 2], 1).unwrap();
    let cache = p.forward(&[0.3, -0.2, 1.0]).unwrap();
    let g = p.backward(&cache, &[0.0, 0.0]).unwrap();
    assert!(g.values().all(|&v| v == 0.0));
}

#[test]
fn deep_network_gradient_matches_finite_differences() {
    let code = gaussian_code::<f64>(6, 4, 2).unwrap();
    let mut rng = rng(31);
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let params = NetParams::<f64>::init(&[5, 7, 6, 4], seed).unwrap();
        let mut batch = Vec::new();
        while batch.len() < 4 {
            let x = normal_vec(&mut rng, 5);
            if decoder::normalize(&params.output(&x).unwrap()).is_ok() {
                batch.push((x, rng.random_range(0..6)));
            }
        }
        let features = Matrix::from_rows(&batch.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>()).unwrap();
        let data = Dataset::new(features, batch.iter().map(|(_, y)| *y).collect(), 6).unwrap();
        let (_, grads) = batch_gradient(&params, &data, &code, &[0, 1, 2, 3]).unwrap();
        for (l, layer) in grads.layers.iter().enumerate() {
            let flat: Vec<f64> = layer.weights.as_slice().iter().chain(&layer.bias).copied().collect();
            for idx in 0..flat.len() {
                worst = worst.max(rel_err(flat[idx], fd_net_coordinate(&params, &code, &batch, l, idx)));
            }
        }
    }
    assert!(worst < FD_REL_TOL, "worst relative error {worst}");
}

#[test]
fn full_batch_epoch_is_one_gradient_step() {
    let data = overlapping(10, 3);
    let code = gaussian_code::<f64>(3, 4, 1).unwrap();
    let params = NetParams::<f64>::init(&[3, 6, 4], 2).unwrap();
    let cfg = TrainConfig { epochs: 1, batch_size: data.len(), learning_rate: 0.7, ..TrainConfig::default() };
    let trained = train(params.clone(), &data, None, &code, &cfg).unwrap().params;

    let all: Vec<usize> = (0..data.len()).collect();
    let (_, g) = batch_gradient(&params, &data, &code, &all).unwrap();
    for (after, (before, grad)) in trained.layers.iter().zip(params.layers.iter().zip(&g.layers)) {
        let expect = before.weights.as_slice().iter().zip(grad.weights.as_slice()).map(|(p, d)| p - 0.7 * d);
        for (a, e) in after.weights.as_slice().iter().zip(expect) {
            assert!((a - e).abs() < 1e-12);
        }
        for ((a, p), d) in after.bias.iter().zip(&before.bias).zip(&grad.bias) {
            assert!((a - (p - 0.7 * d)).abs() < 1e-12);
        }
    }
}

#[test]
fn separable_four_classes_are_learned() {
    let data = separable_four(25, 4);
    let code = one_hot::<f64>(4).unwrap();
    let params = NetParams::<f64>::init(&[2, 4], 1).unwrap();
    let cfg = TrainConfig { epochs: 200, batch_size: 8, learning_rate: 1.0, ..TrainConfig::default() };
    let out = train(params, &data, None, &code, &cfg).unwrap();
    let acc = out.metrics.last().unwrap().train.accuracy;
    assert!(acc >= 0.95, "train accuracy {acc}");
}

#[test]
fn linear_head_descends_to_a_stationary_point() {
    let data = overlapping(30, 5);
    let code = gaussian_code::<f64>(3, 3, 4).unwrap();
    let all: Vec<usize> = (0..data.len()).collect();
    let mut params = NetParams::<f64>::init(&[3, 3], 6).unwrap();
    let norm = |p: &NetParams<f64>| batch_gradient(p, &data, &code, &all).unwrap().1.values().map(|v| v * v).sum::<f64>().sqrt();
    let start = norm(&params);
    let cfg = TrainConfig { epochs: 20000, batch_size: data.len(), learning_rate: 5.0, shuffle: false, ..TrainConfig::default() };
    params = train(params, &data, None, &code, &cfg).unwrap().params;
    let end = norm(&params);
    assert!(end < 1e-3 * start, "gradient norm {start} -> {end}");
}

#[test]
fn training_is_deterministic() {
    let data = overlapping(12, 7);
    let code = gaussian_code::<f64>(3, 5, 7).unwrap();
    let cfg = TrainConfig { epochs: 5, batch_size: 4, learning_rate: 2.0, seed: 9, ..TrainConfig::default() };
    let run = || train(NetParams::<f64>::init(&[3, 8, 5], 7).unwrap(), &data, Some(&data), &code, &cfg).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.params, b.params);
    assert_eq!(metrics_csv(&a.metrics), metrics_csv(&b.metrics));
    let other = train(NetParams::<f64>::init(&[3, 8, 5], 7).unwrap(), &data, None, &code, &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.params, other.params);
}

#[test]
fn overflowing_updates_report_divergence() {
    let data = overlapping(10, 8);
    let code = one_hot::<f64>(3).unwrap();
    let cfg = TrainConfig { epochs: 5, batch_size: 5, learning_rate: 1e300, ..TrainConfig::default() };
    let r = train(NetParams::<f64>::init(&[3, 6, 3], 1).unwrap(), &data, None, &code, &cfg);
    assert!(matches!(r, Err(EcocError::TrainingDiverged(1))), "{r:?}");
}

#[test]
fn mismatched_shapes_and_configs_are_rejected() {
    let data = overlapping(4, 9);
    let code = one_hot::<f64>(3).unwrap();
    let cfg = TrainConfig::default();
    assert!(matches!(train(NetParams::<f64>::init(&[3, 4], 0).unwrap(), &data, None, &code, &cfg), Err(EcocError::Shape(_))));
    assert!(matches!(train(NetParams::<f64>::init(&[2, 3], 0).unwrap(), &data, None, &code, &cfg), Err(EcocError::Shape(_))));
    for bad in [
        TrainConfig { batch_size: 0, ..cfg.clone() },
        TrainConfig { learning_rate: 0.0, ..cfg.clone() },
        TrainConfig { lr_decay_factor: 1.5, ..cfg.clone() },
    ] {
        assert!(matches!(train(NetParams::<f64>::init(&[3, 3], 0).unwrap(), &data, None, &code, &bad), Err(EcocError::Config(_))));
    }
}

#[test]
fn learning_rate_schedule() {
    let cfg = TrainConfig { learning_rate: 1.0, lr_decay_epoch: Some(3), lr_decay_factor: 0.1, ..TrainConfig::default() };
    assert_eq!(cfg.learning_rate_at(1), 1.0);
    assert_eq!(cfg.learning_rate_at(3), 1.0);
    assert!((cfg.learning_rate_at(4) - 0.1).abs() < 1e-15);
    assert!((cfg.learning_rate_at(7) - 0.01).abs() < 1e-15);
}

#[test]
fn metrics_rows_and_precision() {
    let data = overlapping(6, 10);
    let code = gaussian_code::<f64>(3, 4, 2).unwrap();
    let cfg = TrainConfig { epochs: 3, batch_size: 4, learning_rate: 1.0, ..TrainConfig::default() };
    let out = train(NetParams::<f64>::init(&[3, 4], 1).unwrap(), &data, Some(&data), &code, &cfg).unwrap();
    let csv = metrics_csv(&out.metrics);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,split,loss,accuracy,grad_nonzero_ratio");
    assert_eq!(lines.len(), 1 + 3 * 2);
    let loss = lines[1].split(',').nth(2).unwrap();
    let mantissa = loss.split('e').next().unwrap().replace(['.', '-'], "");
    assert!(mantissa.len() >= 9, "{loss}");
    let parsed: f64 = loss.parse().unwrap();
    assert!((parsed - out.metrics[0].train.loss).abs() <= 1e-9 * parsed.abs());
    for m in &out.metrics {
        assert!((0.0..=1.0).contains(&m.train.grad_nonzero_ratio));
    }
    let eval = evaluate(&out.params, &data, &code, 4).unwrap();
    assert_eq!(eval.accuracy, out.metrics.last().unwrap().eval.unwrap().accuracy);
}

#[test]
fn model_bytes_round_trip() {
    let p = NetParams::<f64>::init(&[4, 6, 3], 2).unwrap();
    let bytes = p.to_bytes();
    assert_eq!(&bytes[..7], b"ECOCNET");
    assert_eq!(NetParams::<f64>::from_bytes(&bytes).unwrap(), p);
    assert!(NetParams::<f64>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(NetParams::<f64>::from_bytes(&wrong).is_err());
}

#[test]
fn single_precision_training_runs() {
    let data = separable_four(10, 11);
    let data32 = Dataset::<f32>::new(data.features().cast(), data.labels().to_vec(), 4).unwrap();
    let code: CodeMatrix<f32> = one_hot(4).unwrap();
    let cfg = TrainConfig { epochs: 50, batch_size: 8, learning_rate: 1.0, ..TrainConfig::default() };
    let out = train(NetParams::<f32>::init(&[2, 4], 1).unwrap(), &data32, None, &code, &cfg).unwrap();
    assert!(out.metrics.last().unwrap().train.accuracy >= 0.9);
}
