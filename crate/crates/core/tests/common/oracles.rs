//! Reference computations used to check the library. Nothing here calls into
//! the code paths being verified (backprop, metric aggregation).

#![allow(dead_code, clippy::needless_range_loop)]

use dqlids::data::{ClassLabel, EncodedDataset, EncodingMode, NormalizationStats};
use dqlids::nn::{ActionTarget, QNetwork};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-layer pre-activations of one record, computed with plain loops.
pub fn naive_pre_activations(net: &QNetwork, x: &[f64]) -> Vec<Vec<f64>> {
    let mut input = x.to_vec();
    let mut pres = Vec::new();
    for layer in net.layers() {
        let (fan_in, fan_out) = layer.weights.dim();
        let mut z = vec![0.0; fan_out];
        for (j, zj) in z.iter_mut().enumerate() {
            let mut acc = layer.bias[j];
            for i in 0..fan_in {
                acc += input[i] * layer.weights[[i, j]];
            }
            *zj = acc;
        }
        input = z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        pres.push(z);
    }
    pres
}

pub fn naive_forward(net: &QNetwork, x: &[f64]) -> Vec<f64> {
    naive_pre_activations(net, x)
        .pop()
        .unwrap()
        .into_iter()
        .map(|v| v.max(0.0))
        .collect()
}

/// Mean squared error over the chosen actions.
pub fn naive_loss(net: &QNetwork, batch: ArrayView2<'_, f64>, targets: &[ActionTarget]) -> f64 {
    let mut sum = 0.0;
    for (row, t) in batch.rows().into_iter().zip(targets) {
        let q = naive_forward(net, &row.to_vec());
        sum += (q[t.action] - t.target).powi(2);
    }
    sum / targets.len() as f64
}

/// Smallest |pre-activation| over the batch; finite differences are only
/// trustworthy away from ReLU kinks.
pub fn min_abs_pre_activation(net: &QNetwork, batch: ArrayView2<'_, f64>) -> f64 {
    batch
        .rows()
        .into_iter()
        .flat_map(|row| {
            naive_pre_activations(net, &row.to_vec())
                .into_iter()
                .flatten()
        })
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min)
}

/// Central-difference gradient for every parameter, flattened layer by
/// layer (weights row-major, then bias).
pub fn finite_difference_gradients(
    net: &QNetwork,
    batch: ArrayView2<'_, f64>,
    targets: &[ActionTarget],
    h: f64,
) -> Vec<f64> {
    let mut probe = net.clone();
    let mut out = Vec::new();
    for l in 0..net.layers().len() {
        let (fan_in, fan_out) = net.layers()[l].weights.dim();
        for i in 0..fan_in {
            for j in 0..fan_out {
                let orig = probe.layers()[l].weights[[i, j]];
                probe.layers_mut()[l].weights[[i, j]] = orig + h;
                let up = naive_loss(&probe, batch, targets);
                probe.layers_mut()[l].weights[[i, j]] = orig - h;
                let down = naive_loss(&probe, batch, targets);
                probe.layers_mut()[l].weights[[i, j]] = orig;
                out.push((up - down) / (2.0 * h));
            }
        }
        for j in 0..fan_out {
            let orig = probe.layers()[l].bias[j];
            probe.layers_mut()[l].bias[j] = orig + h;
            let up = naive_loss(&probe, batch, targets);
            probe.layers_mut()[l].bias[j] = orig - h;
            let down = naive_loss(&probe, batch, targets);
            probe.layers_mut()[l].bias[j] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps exact zeros from
/// producing 0/0.
pub fn relative_error(a: f64, b: f64) -> f64 {
    const FLOOR: f64 = 1e-6;
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

/// One-vs-rest counts and metrics computed by scanning the raw vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteClass {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteReport {
    pub classes: Vec<BruteClass>,
    pub overall_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_accuracy: f64,
}

pub fn brute_force_metrics(predictions: &[usize], labels: &[usize]) -> BruteReport {
    let n = predictions.len() as u64;
    let mut classes = Vec::new();
    for c in 0..ClassLabel::COUNT {
        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for (&p, &t) in predictions.iter().zip(labels) {
            match (p == c, t == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        classes.push(BruteClass {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            accuracy: (tp + tn) as f64 / n as f64,
        });
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, t)| p == t)
        .count();
    let present: Vec<&BruteClass> = classes.iter().filter(|c| c.tp + c.fn_ > 0).collect();
    let k = present.len() as f64;
    let mut sums = [0.0; 4];
    for c in &present {
        sums[0] += c.precision;
        sums[1] += c.recall;
        sums[2] += c.f1;
        sums[3] += c.accuracy;
    }
    BruteReport {
        overall_accuracy: correct as f64 / n as f64,
        macro_precision: sums[0] / k,
        macro_recall: sums[1] / k,
        macro_f1: sums[2] / k,
        macro_accuracy: sums[3] / k,
        classes,
    }
}

/// Two classes split by feature 0 with a margin: Normal below 0.4, DoS above 0.6.
/// All other features are uniform noise.
pub fn separable_dataset(n: usize, width: usize, seed: u64) -> EncodedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Array2::<f64>::zeros((n, width));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let attack = rng.random_bool(0.5);
        m[[i, 0]] = if attack {
            rng.random_range(0.6..=1.0)
        } else {
            rng.random_range(0.0..0.4)
        };
        for j in 1..width {
            m[[i, j]] = rng.random::<f64>();
        }
        labels.push(if attack {
            ClassLabel::DoS
        } else {
            ClassLabel::Normal
        });
    }
    EncodedDataset::new(
        m,
        labels,
        NormalizationStats::unit(width),
        EncodingMode::Ordinal,
    )
    .unwrap()
}
