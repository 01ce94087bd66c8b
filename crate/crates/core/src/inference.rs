//! Classification strategies built on the softmax head and the PAD scores.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::activation_model::{argmax, ActivationRecord, ActivationSet, PadModel};
use crate::error::{check_len, Error, Result};
use crate::scoring::{argmin_class, Scorer, ZMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Argmax of the softmax vector.
    Softmax,
    /// Argmin of the KL-scores.
    KlMin,
    /// Argmin of the Z-scores.
    ZMin,
    /// A label only when softmax, KL and Z agree; abstains otherwise.
    EnsAnd,
    /// Oracle: the ground truth whenever any base strategy finds it,
    /// otherwise the softmax label. Never abstains.
    EnsOpt,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Softmax,
        Strategy::KlMin,
        Strategy::ZMin,
        Strategy::EnsAnd,
        Strategy::EnsOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Softmax => "softmax",
            Strategy::KlMin => "kl",
            Strategy::ZMin => "z",
            Strategy::EnsAnd => "ens-and",
            Strategy::EnsOpt => "ens-opt",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Label(usize),
    Abstain,
}

impl Decision {
    pub fn label(self) -> Option<usize> {
        match self {
            Decision::Label(c) => Some(c),
            Decision::Abstain => None,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Label(c) => write!(f, "{c}"),
            Decision::Abstain => f.write_str("ABSTAIN"),
        }
    }
}

/// The three base votes for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseVotes {
    pub softmax: usize,
    pub kl: usize,
    pub z: usize,
}

impl BaseVotes {
    pub fn compute(scorer: &Scorer<'_>, record: &ActivationRecord, zmode: ZMode) -> Result<Self> {
        let n_classes = scorer.model().n_classes();
        let softmax = record.softmax()?;
        check_len("record softmax", n_classes, softmax.len())?;
        let kl = scorer.kl_scores(&record.activations)?;
        let z = scorer.z_scores(&record.activations, zmode)?;
        let empty = Error::EmptyInput("class list");
        Ok(Self {
            softmax: argmax(softmax).ok_or(empty.clone())?,
            kl: argmin_class(&kl.values).ok_or(empty.clone())?,
            z: argmin_class(&z.values).ok_or(empty)?,
        })
    }

    /// Applies `strategy` to these votes. `ground_truth` is only consulted
    /// by [`Strategy::EnsOpt`].
    pub fn decide(&self, strategy: Strategy, ground_truth: Option<usize>, sample_id: u64) -> Result<Decision> {
        Ok(match strategy {
            Strategy::Softmax => Decision::Label(self.softmax),
            Strategy::KlMin => Decision::Label(self.kl),
            Strategy::ZMin => Decision::Label(self.z),
            Strategy::EnsAnd => {
                if self.softmax == self.kl && self.kl == self.z {
                    Decision::Label(self.softmax)
                } else {
                    Decision::Abstain
                }
            }
            Strategy::EnsOpt => {
                let truth = ground_truth.ok_or(Error::MissingGroundTruth(sample_id))?;
                if [self.softmax, self.kl, self.z].contains(&truth) {
                    Decision::Label(truth)
                } else {
                    Decision::Label(self.softmax)
                }
            }
        })
    }
}

pub fn classify(
    strategy: Strategy,
    record: &ActivationRecord,
    model: &PadModel,
    zmode: ZMode,
) -> Result<Decision> {
    let scorer = Scorer::new(model);
    BaseVotes::compute(&scorer, record, zmode)?.decide(strategy, record.ground_truth, record.sample_id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub strategy: Strategy,
    pub n_samples: usize,
    pub n_correct: usize,
    pub n_abstained: usize,
    /// Correct over all samples; abstentions count as errors.
    pub strict_accuracy: f64,
    /// Correct over decided samples; `None` when every sample abstained.
    pub selective_accuracy: Option<f64>,
}

impl EvaluationReport {
    fn from_decisions(strategy: Strategy, decisions: &[(Decision, usize)]) -> Self {
        let n_samples = decisions.len();
        let n_abstained = decisions
            .iter()
            .filter(|(d, _)| *d == Decision::Abstain)
            .count();
        let n_correct = decisions
            .iter()
            .filter(|(d, truth)| d.label() == Some(*truth))
            .count();
        let decided = n_samples - n_abstained;
        Self {
            strategy,
            n_samples,
            n_correct,
            n_abstained,
            strict_accuracy: if n_samples == 0 {
                0.0
            } else {
                n_correct as f64 / n_samples as f64
            },
            selective_accuracy: (decided > 0).then(|| n_correct as f64 / decided as f64),
        }
    }
}

/// Per-sample decisions of one strategy, in record order.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub decisions: Vec<(u64, Decision)>,
}

fn votes_for_set(test_set: &ActivationSet, model: &PadModel, zmode: ZMode) -> Result<Vec<(u64, usize, BaseVotes)>> {
    check_len("activation set units", model.n_units(), test_set.n_units())?;
    check_len("activation set classes", model.n_classes(), test_set.n_classes())?;
    let scorer = Scorer::new(model);
    test_set
        .records()
        .par_iter()
        .map(|r| Ok((r.sample_id, r.label()?, BaseVotes::compute(&scorer, r, zmode)?)))
        .collect()
}

pub fn evaluate_detailed(
    strategy: Strategy,
    test_set: &ActivationSet,
    model: &PadModel,
    zmode: ZMode,
) -> Result<Evaluation> {
    let votes = votes_for_set(test_set, model, zmode)?;
    let mut decisions = Vec::with_capacity(votes.len());
    let mut scored = Vec::with_capacity(votes.len());
    for (id, truth, v) in &votes {
        let d = v.decide(strategy, Some(*truth), *id)?;
        decisions.push((*id, d));
        scored.push((d, *truth));
    }
    Ok(Evaluation {
        report: EvaluationReport::from_decisions(strategy, &scored),
        decisions,
    })
}

pub fn evaluate(
    strategy: Strategy,
    test_set: &ActivationSet,
    model: &PadModel,
    zmode: ZMode,
) -> Result<EvaluationReport> {
    evaluate_detailed(strategy, test_set, model, zmode).map(|e| e.report)
}

/// Reports for every strategy, sharing one pass of scoring.
pub fn evaluate_all(test_set: &ActivationSet, model: &PadModel, zmode: ZMode) -> Result<Vec<EvaluationReport>> {
    let votes = votes_for_set(test_set, model, zmode)?;
    Strategy::ALL
        .into_iter()
        .map(|strategy| {
            let scored = votes
                .iter()
                .map(|(id, truth, v)| Ok((v.decide(strategy, Some(*truth), *id)?, *truth)))
                .collect::<Result<Vec<_>>>()?;
            Ok(EvaluationReport::from_decisions(strategy, &scored))
        })
        .collect()
}
