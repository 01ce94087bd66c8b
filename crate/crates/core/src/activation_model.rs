//! Activation records and per-class activation distributions (PADs).
//!
//! A [`PadModel`] summarises, for one hidden layer, how every unit behaves
//! for every class: the mean and population standard deviation of the unit's
//! activation over the training records the network classified correctly.
//! Misclassified records never contribute.
//!
//! Summation order is fixed: records are visited in ascending `sample_id`
//! order and statistics use a two-pass algorithm (mean, then squared
//! deviations), so a model is reproducible regardless of input order.

use crate::error::{check_len, Error, Result};

pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-6;
pub const DEFAULT_KL_EPSILON: f64 = 1e-9;
pub const SOFTMAX_SUM_TOLERANCE: f64 = 1e-4;

/// One sample's view of the network: the chosen layer's activations plus
/// the classifier head's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    pub sample_id: u64,
    pub activations: Vec<f32>,
    pub softmax: Option<Vec<f32>>,
    pub predicted: Option<usize>,
    pub ground_truth: Option<usize>,
}

impl ActivationRecord {
    /// The network's predicted class: the stored prediction, or the softmax
    /// argmax when only the softmax vector is present.
    pub fn prediction(&self) -> Result<usize> {
        match (self.predicted, &self.softmax) {
            (Some(p), _) => Ok(p),
            (None, Some(s)) => argmax(s).ok_or(Error::MissingPrediction(self.sample_id)),
            (None, None) => Err(Error::MissingPrediction(self.sample_id)),
        }
    }

    pub fn label(&self) -> Result<usize> {
        self.ground_truth
            .ok_or(Error::MissingGroundTruth(self.sample_id))
    }

    pub fn softmax(&self) -> Result<&[f32]> {
        self.softmax
            .as_deref()
            .ok_or(Error::MissingSoftmax(self.sample_id))
    }

    /// Maximum softmax probability.
    pub fn confidence(&self) -> Result<f64> {
        let s = self.softmax()?;
        Ok(s.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64)))
    }

    /// True when both labels are present and agree.
    pub fn is_correct(&self) -> Result<bool> {
        Ok(self.prediction()? == self.label()?)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f32]) -> Option<usize> {
    let mut best: Option<(usize, f32)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// A batch of records captured at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSet {
    layer_name: String,
    n_units: usize,
    n_classes: usize,
    records: Vec<ActivationRecord>,
}

impl ActivationSet {
    /// Builds a set, checking that every record matches the declared
    /// dimensions, class indices are in range, and softmax vectors sum to 1.
    pub fn new(
        layer_name: impl Into<String>,
        n_units: usize,
        n_classes: usize,
        records: Vec<ActivationRecord>,
    ) -> Result<Self> {
        for r in &records {
            check_len("record activations", n_units, r.activations.len())?;
            if let Some(s) = &r.softmax {
                check_len("record softmax", n_classes, s.len())?;
                let sum: f64 = s.iter().map(|&v| v as f64).sum();
                if (sum - 1.0).abs() > SOFTMAX_SUM_TOLERANCE {
                    return Err(Error::InvalidSoftmax {
                        sample_id: r.sample_id,
                        sum,
                    });
                }
            }
            for index in [r.predicted, r.ground_truth].into_iter().flatten() {
                if index >= n_classes {
                    return Err(Error::InvalidClass { index, n_classes });
                }
            }
        }
        Ok(Self {
            layer_name: layer_name.into(),
            n_units,
            n_classes,
            records,
        })
    }

    pub fn layer_name(&self) -> &str {
        &self.layer_name
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn records(&self) -> &[ActivationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<ActivationRecord> {
        self.records
    }

    /// Copy of the set with sample ids reassigned to record positions.
    pub fn renumbered(&self) -> Self {
        let mut out = self.clone();
        for (i, r) in out.records.iter_mut().enumerate() {
            r.sample_id = i as u64;
        }
        out
    }

    /// Records that were classified correctly, sorted by `sample_id`.
    fn correct_records_sorted(&self) -> Result<Vec<&ActivationRecord>> {
        let mut correct = Vec::new();
        for r in &self.records {
            if r.is_correct()? {
                correct.push(r);
            }
        }
        correct.sort_by_key(|r| r.sample_id);
        Ok(correct)
    }
}

/// Per-class, per-unit summary statistics for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PadModel {
    layer_name: String,
    n_units: usize,
    n_classes: usize,
    counts: Vec<u64>,
    means: Vec<Vec<f64>>,
    stds: Vec<Vec<f64>>,
    sigma_floor: f64,
    kl_epsilon: f64,
}

impl PadModel {
    /// Assembles a model from stored statistics, validating shapes and signs.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        layer_name: impl Into<String>,
        n_units: usize,
        n_classes: usize,
        counts: Vec<u64>,
        means: Vec<Vec<f64>>,
        stds: Vec<Vec<f64>>,
        sigma_floor: f64,
        kl_epsilon: f64,
    ) -> Result<Self> {
        check_len("model counts", n_classes, counts.len())?;
        check_len("model means", n_classes, means.len())?;
        check_len("model stds", n_classes, stds.len())?;
        for (c, (m, s)) in means.iter().zip(&stds).enumerate() {
            check_len("model means row", n_units, m.len())?;
            check_len("model stds row", n_units, s.len())?;
            if counts[c] == 0 {
                return Err(Error::EmptyClass(c));
            }
            if s.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "negative or NaN standard deviation for class {c}"
                )));
            }
        }
        validate_guards(sigma_floor, kl_epsilon)?;
        Ok(Self {
            layer_name: layer_name.into(),
            n_units,
            n_classes,
            counts,
            means,
            stds,
            sigma_floor,
            kl_epsilon,
        })
    }

    pub fn layer_name(&self) -> &str {
        &self.layer_name
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn stds(&self) -> &[Vec<f64>] {
        &self.stds
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    pub fn kl_epsilon(&self) -> f64 {
        self.kl_epsilon
    }
}

fn validate_guards(sigma_floor: f64, kl_epsilon: f64) -> Result<()> {
    if !(sigma_floor > 0.0 && sigma_floor.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "sigma_floor must be positive, got {sigma_floor}"
        )));
    }
    if !(kl_epsilon > 0.0 && kl_epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "kl_epsilon must be positive, got {kl_epsilon}"
        )));
    }
    Ok(())
}

/// Builds the PAD for `train_set` from its correctly classified records.
///
/// Standard deviations use the population (divide-by-count) estimator.
pub fn build_pad(train_set: &ActivationSet, sigma_floor: f64, kl_epsilon: f64) -> Result<PadModel> {
    validate_guards(sigma_floor, kl_epsilon)?;
    let n_units = train_set.n_units;
    let n_classes = train_set.n_classes;
    for r in &train_set.records {
        check_len("record activations", n_units, r.activations.len())?;
    }

    let mut by_class: Vec<Vec<&ActivationRecord>> = vec![Vec::new(); n_classes];
    for r in train_set.correct_records_sorted()? {
        by_class[r.label()?].push(r);
    }
    if let Some(c) = by_class.iter().position(|rs| rs.is_empty()) {
        return Err(Error::EmptyClass(c));
    }

    let mut counts = Vec::with_capacity(n_classes);
    let mut means = Vec::with_capacity(n_classes);
    let mut stds = Vec::with_capacity(n_classes);
    for records in &by_class {
        let n = records.len() as f64;
        let mut mean = vec![0.0f64; n_units];
        for r in records {
            for (m, &a) in mean.iter_mut().zip(&r.activations) {
                *m += a as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut var = vec![0.0f64; n_units];
        for r in records {
            for ((v, &m), &a) in var.iter_mut().zip(&mean).zip(&r.activations) {
                let d = a as f64 - m;
                *v += d * d;
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();

        counts.push(records.len() as u64);
        means.push(mean);
        stds.push(std);
    }

    Ok(PadModel {
        layer_name: train_set.layer_name.clone(),
        n_units,
        n_classes,
        counts,
        means,
        stds,
        sigma_floor,
        kl_epsilon,
    })
}

/// How many classes each unit fires for, and how units distribute over
/// those counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiringHistogram {
    /// Per unit: number of classes with at least one correct record whose
    /// activation at that unit exceeds the threshold.
    pub firing_class_count_per_unit: Vec<usize>,
    /// `histogram[k]` is the number of units that fire for exactly `k`
    /// classes; length `n_classes + 1`.
    pub histogram: Vec<usize>,
}

pub fn class_firing_histogram(train_set: &ActivationSet, fire_threshold: f64) -> Result<FiringHistogram> {
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let n_units = train_set.n_units;
    let n_classes = train_set.n_classes;
    let mut fires = vec![vec![false; n_units]; n_classes];
    for r in &train_set.records {
        check_len("record activations", n_units, r.activations.len())?;
        if !r.is_correct()? {
            continue;
        }
        let row = &mut fires[r.label()?];
        for (f, &a) in row.iter_mut().zip(&r.activations) {
            if a as f64 > fire_threshold {
                *f = true;
            }
        }
    }

    let per_unit: Vec<usize> = (0..n_units)
        .map(|u| fires.iter().filter(|row| row[u]).count())
        .collect();
    let mut histogram = vec![0usize; n_classes + 1];
    for &k in &per_unit {
        histogram[k] += 1;
    }
    Ok(FiringHistogram {
        firing_class_count_per_unit: per_unit,
        histogram,
    })
}
