//! Out-of-distribution rejection rules.
//!
//! With `conf` the top softmax probability and `kl` the minimum KL-score:
//!
//! - `S1` rejects when `conf < alpha`
//! - `S2` rejects when `kl >= beta`
//! - `S3` rejects when both hold

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::activation_model::{ActivationRecord, ActivationSet, PadModel};
use crate::error::{check_len, Error, Result};
use crate::scoring::Scorer;

pub const DEFAULT_ALPHA: f64 = 0.95;
pub const DEFAULT_BETA: f64 = 0.65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OodStrategy {
    S1,
    S2,
    S3,
}

impl OodStrategy {
    pub const ALL: [OodStrategy; 3] = [OodStrategy::S1, OodStrategy::S2, OodStrategy::S3];

    pub fn name(self) -> &'static str {
        match self {
            OodStrategy::S1 => "s1",
            OodStrategy::S2 => "s2",
            OodStrategy::S3 => "s3",
        }
    }
}

impl fmt::Display for OodStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OodStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(OodStrategy::S1),
            "s2" => Ok(OodStrategy::S2),
            "s3" => Ok(OodStrategy::S3),
            _ => Err(format!("unknown OOD strategy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OodConfig {
    alpha: f64,
    beta: f64,
    strategy: OodStrategy,
}

impl OodConfig {
    pub fn new(alpha: f64, beta: f64, strategy: OodStrategy) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { alpha, beta, strategy })
    }

    pub fn with_strategy(self, strategy: OodStrategy) -> Self {
        Self { strategy, ..self }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn strategy(&self) -> OodStrategy {
        self.strategy
    }

    /// Applies the rule to precomputed statistics. `confidence` is only
    /// required by S1 and S3.
    pub fn decide_on(&self, confidence: Option<f64>, min_kl: f64, sample_id: u64) -> Result<OodDecision> {
        let low_conf = || confidence.map(|c| c < self.alpha).ok_or(Error::MissingSoftmax(sample_id));
        let high_kl = min_kl >= self.beta;
        let reject = match self.strategy {
            OodStrategy::S1 => low_conf()?,
            OodStrategy::S2 => high_kl,
            OodStrategy::S3 => low_conf()? && high_kl,
        };
        Ok(if reject { OodDecision::Reject } else { OodDecision::Keep })
    }
}

impl Default for OodConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            strategy: OodStrategy::S3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OodDecision {
    Keep,
    Reject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionReport {
    pub strategy: OodStrategy,
    pub alpha: f64,
    pub beta: f64,
    pub n_samples: usize,
    pub n_rejected: usize,
    pub rejection_rate: f64,
    pub rejected_ids: BTreeSet<u64>,
}

fn record_statistics(scorer: &Scorer<'_>, record: &ActivationRecord, need_conf: bool) -> Result<(Option<f64>, f64)> {
    let confidence = if need_conf {
        let s = record.softmax()?;
        check_len("record softmax", scorer.model().n_classes(), s.len())?;
        Some(record.confidence()?)
    } else {
        record.confidence().ok()
    };
    let kl = scorer
        .kl_scores(&record.activations)?
        .min()
        .ok_or(Error::EmptyInput("class list"))?;
    Ok((confidence, kl))
}

pub fn ood_decide(record: &ActivationRecord, model: &PadModel, config: &OodConfig) -> Result<OodDecision> {
    let scorer = Scorer::new(model);
    let need_conf = config.strategy != OodStrategy::S2;
    let (conf, kl) = record_statistics(&scorer, record, need_conf)?;
    config.decide_on(conf, kl, record.sample_id)
}

/// Per-record `(sample_id, confidence, min KL)` for a set.
pub fn ood_statistics(test_set: &ActivationSet, model: &PadModel, need_conf: bool) -> Result<Vec<(u64, Option<f64>, f64)>> {
    check_len("activation set units", model.n_units(), test_set.n_units())?;
    let scorer = Scorer::new(model);
    test_set
        .records()
        .par_iter()
        .map(|r| {
            let (c, k) = record_statistics(&scorer, r, need_conf)?;
            Ok((r.sample_id, c, k))
        })
        .collect()
}

pub fn rejection_rate(test_set: &ActivationSet, model: &PadModel, config: &OodConfig) -> Result<RejectionReport> {
    if test_set.is_empty() {
        return Err(Error::EmptyInput("test set"));
    }
    let need_conf = config.strategy != OodStrategy::S2;
    let stats = ood_statistics(test_set, model, need_conf)?;
    let mut rejected_ids = BTreeSet::new();
    for (id, conf, kl) in stats {
        if config.decide_on(conf, kl, id)? == OodDecision::Reject {
            rejected_ids.insert(id);
        }
    }
    let n_samples = test_set.len();
    let n_rejected = rejected_ids.len();
    Ok(RejectionReport {
        strategy: config.strategy,
        alpha: config.alpha,
        beta: config.beta,
        n_samples,
        n_rejected,
        rejection_rate: n_rejected as f64 / n_samples as f64,
        rejected_ids,
    })
}

/// Nearest-rank percentile (`q` in `[0, 1]`) of a list of values.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q * v.len() as f64).ceil() as usize;
    Some(v[rank.saturating_sub(1).min(v.len() - 1)])
}
