//! KL- and Z-score metrics of a test activation vector against a [`PadModel`].
//!
//! Both metrics produce one value per class and lower means a better fit, so
//! classification takes the argmin.
//!
//! KL-score: the test vector and each class mean vector are turned into
//! probability vectors by clamping negatives to zero, adding the model's
//! `kl_epsilon` to every entry and L1-normalising. The score is
//! `KL(test || class) = sum_i p_i ln(p_i / q_i)`.
//!
//! Z-score: per unit, `(x - mean) / max(std, sigma_floor)`, averaged over
//! the layer's units. [`ZMode::Signed`] averages the raw deviations;
//! [`ZMode::Absolute`] averages their magnitudes.

use rayon::prelude::*;

use crate::activation_model::PadModel;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreMetric {
    Kl,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ZMode {
    #[default]
    Absolute,
    Signed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub metric: ScoreMetric,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn argmin(&self) -> Option<usize> {
        argmin_class(&self.values)
    }

    pub fn min(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }
}

/// Per-class scores of a sequence of perturbed inputs, one row per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreProfile {
    pub step_labels: Vec<String>,
    pub series: Vec<Vec<f64>>,
}

/// Index of the smallest score; ties go to the lowest index.
pub fn argmin_class(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in scores.iter().enumerate() {
        match best {
            Some((_, b)) if !(v < b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Clamp, smooth and L1-normalise an activation vector into a distribution.
pub fn kl_distribution<I>(values: I, epsilon: f64) -> Vec<f64>
where
    I: IntoIterator<Item = f64>,
{
    let mut p: Vec<f64> = values.into_iter().map(|v| v.max(0.0) + epsilon).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p.iter().zip(q).map(|(&pi, &qi)| pi * (pi / qi).ln()).sum();
    // Rounding can leave identical distributions a hair below zero.
    kl.max(0.0)
}

/// Scoring context with the class reference distributions precomputed.
///
/// Reuse one `Scorer` when scoring many vectors against the same model.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    model: &'a PadModel,
    class_distributions: Vec<Vec<f64>>,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a PadModel) -> Self {
        let class_distributions = model
            .means()
            .iter()
            .map(|m| kl_distribution(m.iter().copied(), model.kl_epsilon()))
            .collect();
        Self {
            model,
            class_distributions,
        }
    }

    pub fn model(&self) -> &PadModel {
        self.model
    }

    pub fn kl_scores(&self, activations: &[f32]) -> Result<ScoreVector> {
        check_len("test activations", self.model.n_units(), activations.len())?;
        let p = kl_distribution(activations.iter().map(|&a| a as f64), self.model.kl_epsilon());
        let values = self
            .class_distributions
            .iter()
            .map(|q| kl_divergence(&p, q))
            .collect();
        Ok(ScoreVector {
            metric: ScoreMetric::Kl,
            values,
        })
    }

    pub fn z_scores(&self, activations: &[f32], mode: ZMode) -> Result<ScoreVector> {
        let model = self.model;
        check_len("test activations", model.n_units(), activations.len())?;
        let floor = model.sigma_floor();
        let n = model.n_units() as f64;
        let values = model
            .means()
            .iter()
            .zip(model.stds())
            .map(|(mean, std)| {
                let total: f64 = activations
                    .iter()
                    .zip(mean)
                    .zip(std)
                    .map(|((&x, &mu), &sigma)| {
                        let d = (x as f64 - mu) / sigma.max(floor);
                        match mode {
                            ZMode::Absolute => d.abs(),
                            ZMode::Signed => d,
                        }
                    })
                    .sum();
                if n > 0.0 {
                    total / n
                } else {
                    0.0
                }
            })
            .collect();
        Ok(ScoreVector {
            metric: ScoreMetric::Z,
            values,
        })
    }

    pub fn scores(&self, activations: &[f32], metric: ScoreMetric, mode: ZMode) -> Result<ScoreVector> {
        match metric {
            ScoreMetric::Kl => self.kl_scores(activations),
            ScoreMetric::Z => self.z_scores(activations, mode),
        }
    }

    /// Scores many vectors in parallel; output order matches input order.
    pub fn scores_batch(
        &self,
        batch: &[&[f32]],
        metric: ScoreMetric,
        mode: ZMode,
    ) -> Result<Vec<ScoreVector>> {
        batch
            .par_iter()
            .map(|a| self.scores(a, metric, mode))
            .collect()
    }
}

pub fn kl_scores(model: &PadModel, activations: &[f32]) -> Result<ScoreVector> {
    Scorer::new(model).kl_scores(activations)
}

pub fn z_scores(model: &PadModel, activations: &[f32], mode: ZMode) -> Result<ScoreVector> {
    Scorer::new(model).z_scores(activations, mode)
}

pub fn score_profile(
    model: &PadModel,
    steps: &[(String, Vec<f32>)],
    metric: ScoreMetric,
    mode: ZMode,
) -> Result<ScoreProfile> {
    let scorer = Scorer::new(model);
    let mut step_labels = Vec::with_capacity(steps.len());
    let mut series = Vec::with_capacity(steps.len());
    for (label, acts) in steps {
        step_labels.push(label.clone());
        series.push(scorer.scores(acts, metric, mode)?.values);
    }
    Ok(ScoreProfile {
        step_labels,
        series,
    })
}

/// Convenience wrapper that errors on empty input instead of returning `None`.
pub fn argmin_of(scores: &ScoreVector) -> Result<usize> {
    scores.argmin().ok_or(Error::EmptyInput("score vector"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(means: Vec<Vec<f64>>, stds: Vec<Vec<f64>>) -> PadModel {
        let c = means.len();
        let u = means[0].len();
        PadModel::from_parts("t", u, c, vec![1; c], means, stds, 1e-6, 1e-9).unwrap()
    }

    // Expected values below come from a 40-digit mpmath evaluation of the
    // clamp/smooth/normalise pipeline followed by sum p ln(p/q).

    #[test]
    fn kl_symmetric_two_class_toy() {
        let m = model(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![vec![1.0; 2]; 2]);
        let s = kl_scores(&m, &[1.0, 1.0]).unwrap();
        let expected = 10.015_059_328_943_233;
        for v in &s.values {
            assert!((v - expected).abs() / expected < 1e-9, "{v}");
        }
    }

    #[test]
    fn kl_with_negative_entries() {
        let m = model(
            vec![vec![2.0, 1.0, 1.0], vec![0.0, 2.0, 0.5]],
            vec![vec![1.0; 3]; 2],
        );
        let s = kl_scores(&m, &[1.0, -2.0, 3.0]).unwrap();
        let expected = [0.650_672_415_418_641_4, 6.054_632_426_743_085];
        for (v, e) in s.values.iter().zip(expected) {
            assert!((v - e).abs() / e < 1e-9, "{v} vs {e}");
        }
        assert_eq!(s.argmin(), Some(0));
    }

    #[test]
    fn kl_matching_mean_is_near_zero() {
        let m = model(
            vec![vec![0.5, 1.5, 0.0], vec![3.0, 0.0, 1.0]],
            vec![vec![1.0; 3]; 2],
        );
        let s = kl_scores(&m, &[3.0, 0.0, 1.0]).unwrap();
        assert!(s.values[1] < 1e-6);
        assert!(s.values[0] > s.values[1]);
    }

    #[test]
    fn kl_zero_vector_is_finite() {
        let m = model(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![vec![1.0; 2]; 2]);
        let s = kl_scores(&m, &[0.0, 0.0]).unwrap();
        let expected = 10.015_059_328_943_233;
        for v in &s.values {
            assert!(v.is_finite());
            assert!((v - expected).abs() / expected < 1e-9);
        }
    }

    #[test]
    fn z_signed_and_absolute_hand_case() {
        let m = model(vec![vec![1.0, 2.0]], vec![vec![1.0, 1.0]]);
        let signed = z_scores(&m, &[0.0, 4.0], ZMode::Signed).unwrap();
        let abs = z_scores(&m, &[0.0, 4.0], ZMode::Absolute).unwrap();
        assert_eq!(signed.values, vec![0.5]);
        assert_eq!(abs.values, vec![1.5]);
    }

    #[test]
    fn z_zero_deviation_is_exactly_zero() {
        let m = model(vec![vec![1.0, 2.0], vec![0.0, 0.0]], vec![vec![0.0, 0.3], vec![1.0, 1.0]]);
        for mode in [ZMode::Absolute, ZMode::Signed] {
            let s = z_scores(&m, &[1.0, 2.0], mode).unwrap();
            assert_eq!(s.values[0], 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = model(vec![vec![1.0, 2.0]], vec![vec![1.0, 1.0]]);
        assert!(matches!(
            kl_scores(&m, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1, .. })
        ));
        assert!(z_scores(&m, &[1.0, 2.0, 3.0], ZMode::Absolute).is_err());
    }

    #[test]
    fn argmin_on_table_rows() {
        let row_a = [2.223, 1.627, 1.653, 1.599, 1.539, 1.364, 1.073, 1.169, 1.181, 1.239];
        let row_b = [2.445, 2.038, 2.08, 1.566, 1.442, 1.207, 1.269, 1.188, 1.183, 1.125];
        assert_eq!(argmin_class(&row_a), Some(6));
        assert_eq!(argmin_class(&row_b), Some(9));
        assert_eq!(argmin_class(&[1.0, 1.0]), Some(0));
        assert_eq!(argmin_class(&[]), None);
    }

    #[test]
    fn profile_rows_match_scalar_calls() {
        let m = model(
            vec![vec![1.0, 0.0, 2.0], vec![0.0, 1.0, 0.0], vec![2.0, 2.0, 0.5]],
            vec![vec![0.5, 0.5, 0.5]; 3],
        );
        let steps: Vec<(String, Vec<f32>)> = vec![
            ("0".into(), vec![2.0, 2.0, 0.5]),
            ("15".into(), vec![1.0, 0.5, 0.5]),
            ("30".into(), vec![0.0, 0.2, 1.5]),
        ];
        let p = score_profile(&m, &steps, ScoreMetric::Kl, ZMode::Absolute).unwrap();
        assert_eq!(p.step_labels, vec!["0", "15", "30"]);
        for (row, (_, acts)) in p.series.iter().zip(&steps) {
            assert_eq!(row, &kl_scores(&m, acts).unwrap().values);
        }
        assert!(p.series[0][2] < 1e-6);
        assert_eq!(p.series[0].iter().copied().reduce(f64::min), Some(p.series[0][2]));

        let pz = score_profile(&m, &steps, ScoreMetric::Z, ZMode::Signed).unwrap();
        for (row, (_, acts)) in pz.series.iter().zip(&steps) {
            assert_eq!(row, &z_scores(&m, acts, ZMode::Signed).unwrap().values);
        }

        let empty = score_profile(&m, &[], ScoreMetric::Kl, ZMode::Absolute).unwrap();
        assert!(empty.series.is_empty() && empty.step_labels.is_empty());
    }
}
