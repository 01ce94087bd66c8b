//! Random fixtures and brute-force oracles shared by the integration tests.
//!
//! The oracles recompute each quantity straight from its definition with
//! plain loops; none of them call into the scoring or PAD code.

#![allow(dead_code)]

use pad_core::{ActivationRecord, ActivationSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_activation(rng: &mut ChaCha8Rng) -> f32 {
    match rng.random_range(0..10) {
        0..=2 => 0.0,
        3 => rng.random_range(-1.0..0.0),
        _ => rng.random_range(0.0..5.0),
    }
}

/// A softmax vector whose argmax is `peak`.
fn peaked_softmax(rng: &mut ChaCha8Rng, n_classes: usize, peak: usize) -> Vec<f32> {
    let mut logits: Vec<f64> = (0..n_classes).map(|_| rng.random_range(-2.0..2.0)).collect();
    logits[peak] += 4.5;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.iter().map(|e| (e / total) as f32).collect()
}

/// A labelled set where class `c` owns record `c` (correct), so every class
/// has at least one correct record. Other records are correct with
/// probability ~0.7. `predicted` always equals the softmax argmax.
pub fn random_set(rng: &mut ChaCha8Rng, n_classes: usize, n_units: usize, n_records: usize) -> ActivationSet {
    assert!(n_records >= n_classes);
    let class_means: Vec<Vec<f32>> = (0..n_classes)
        .map(|_| (0..n_units).map(|_| random_activation(rng)).collect())
        .collect();
    let records = (0..n_records)
        .map(|i| {
            let truth = if i < n_classes { i } else { rng.random_range(0..n_classes) };
            let predicted = if i < n_classes || rng.random_bool(0.7) {
                truth
            } else {
                rng.random_range(0..n_classes)
            };
            let activations = class_means[truth]
                .iter()
                .map(|&m| if rng.random_bool(0.5) { m + random_activation(rng) * 0.5 } else { random_activation(rng) })
                .collect();
            ActivationRecord {
                sample_id: i as u64,
                activations,
                softmax: Some(peaked_softmax(rng, n_classes, predicted)),
                predicted: Some(predicted),
                ground_truth: Some(truth),
            }
        })
        .collect();
    ActivationSet::new("random", n_units, n_classes, records).unwrap()
}

pub fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    let c = rng.random_range(1..=5);
    let u = rng.random_range(1..=16);
    let n = rng.random_range(c..=200);
    (c, u, n)
}

/// Per-class mean and population std over records with predicted == truth.
pub struct PadOracle {
    pub counts: Vec<u64>,
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
}

pub fn pad_oracle(set: &ActivationSet) -> PadOracle {
    let c = set.n_classes();
    let u = set.n_units();
    let mut counts = vec![0u64; c];
    let mut means = vec![vec![0.0; u]; c];
    let mut stds = vec![vec![0.0; u]; c];
    for class in 0..c {
        let members: Vec<&ActivationRecord> = set
            .records()
            .iter()
            .filter(|r| r.predicted == Some(class) && r.ground_truth == Some(class))
            .collect();
        counts[class] = members.len() as u64;
        for unit in 0..u {
            let values: Vec<f64> = members.iter().map(|r| r.activations[unit] as f64).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
            means[class][unit] = mean;
            stds[class][unit] = var.sqrt();
        }
    }
    PadOracle { counts, means, stds }
}

pub fn kl_oracle(test: &[f32], mean: &[f64], epsilon: f64) -> f64 {
    let p_raw: Vec<f64> = test.iter().map(|&x| if x < 0.0 { epsilon } else { x as f64 + epsilon }).collect();
    let q_raw: Vec<f64> = mean.iter().map(|&x| if x < 0.0 { epsilon } else { x + epsilon }).collect();
    let p_sum: f64 = p_raw.iter().sum();
    let q_sum: f64 = q_raw.iter().sum();
    let mut kl = 0.0;
    for i in 0..p_raw.len() {
        let p = p_raw[i] / p_sum;
        let q = q_raw[i] / q_sum;
        kl += p * (p / q).ln();
    }
    kl
}

pub fn z_oracle(test: &[f32], mean: &[f64], std: &[f64], floor: f64, signed: bool) -> f64 {
    let mut total = 0.0;
    for i in 0..test.len() {
        let sigma = if std[i] > floor { std[i] } else { floor };
        let d = (test[i] as f64 - mean[i]) / sigma;
        total += if signed { d } else { d.abs() };
    }
    total / test.len() as f64
}

/// Relative closeness; exact equality covers the all-zero case.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
