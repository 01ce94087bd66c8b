//! Coverage-versus-accuracy sweeps.
//!
//! A sample is *covered* (decided automatically) when its statistic passes
//! the threshold, otherwise it is deferred for manual review:
//!
//! | metric       | statistic          | covered iff        | label           |
//! |--------------|--------------------|--------------------|-----------------|
//! | `Confidence` | max softmax        | `stat >= threshold`| softmax argmax  |
//! | `Kl`         | min KL-score       | `stat <= threshold`| KL argmin       |
//! | `Z`          | min Z-score        | `stat <= threshold`| Z argmin        |

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::activation_model::{argmax, ActivationSet, PadModel};
use crate::error::{check_len, Error, Result};
use crate::scoring::{Scorer, ZMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoverageMetric {
    Confidence,
    Kl,
    Z,
}

impl CoverageMetric {
    pub fn name(self) -> &'static str {
        match self {
            CoverageMetric::Confidence => "confidence",
            CoverageMetric::Kl => "kl",
            CoverageMetric::Z => "z",
        }
    }

    fn covers(self, statistic: f64, threshold: f64) -> bool {
        match self {
            CoverageMetric::Confidence => statistic >= threshold,
            CoverageMetric::Kl | CoverageMetric::Z => statistic <= threshold,
        }
    }
}

impl fmt::Display for CoverageMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CoverageMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "confidence" => Ok(CoverageMetric::Confidence),
            "kl" => Ok(CoverageMetric::Kl),
            "z" => Ok(CoverageMetric::Z),
            _ => Err(format!("unknown coverage metric {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Thresholds {
    /// The sorted distinct per-sample statistics.
    Auto,
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveragePoint {
    pub threshold: f64,
    pub coverage: f64,
    pub selective_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    pub metric: CoverageMetric,
    /// Sorted by ascending threshold.
    pub points: Vec<CoveragePoint>,
}

/// One sample's statistic and whether its automatic label is correct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStatistic {
    pub sample_id: u64,
    pub statistic: f64,
    pub correct: bool,
}

/// Per-sample statistics for `metric`, in record order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStatistics {
    pub metric: CoverageMetric,
    pub samples: Vec<SampleStatistic>,
}

impl SampleStatistics {
    pub fn collect(test_set: &ActivationSet, model: &PadModel, metric: CoverageMetric, zmode: ZMode) -> Result<Self> {
        check_len("activation set units", model.n_units(), test_set.n_units())?;
        check_len("activation set classes", model.n_classes(), test_set.n_classes())?;
        let scorer = Scorer::new(model);
        let samples = test_set
            .records()
            .par_iter()
            .map(|r| {
                let truth = r.label()?;
                let (statistic, label) = match metric {
                    CoverageMetric::Confidence => {
                        let s = r.softmax()?;
                        check_len("record softmax", model.n_classes(), s.len())?;
                        (r.confidence()?, argmax(s))
                    }
                    CoverageMetric::Kl => {
                        let s = scorer.kl_scores(&r.activations)?;
                        (s.min().unwrap_or(f64::NAN), s.argmin())
                    }
                    CoverageMetric::Z => {
                        let s = scorer.z_scores(&r.activations, zmode)?;
                        (s.min().unwrap_or(f64::NAN), s.argmin())
                    }
                };
                Ok(SampleStatistic {
                    sample_id: r.sample_id,
                    statistic,
                    correct: label == Some(truth),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { metric, samples })
    }

    /// Sorted distinct statistic values.
    pub fn distinct_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.samples.iter().map(|s| s.statistic).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Ids of samples covered at `threshold`.
    pub fn covered_at(&self, threshold: f64) -> BTreeSet<u64> {
        self.samples
            .iter()
            .filter(|s| self.metric.covers(s.statistic, threshold))
            .map(|s| s.sample_id)
            .collect()
    }

    pub fn point(&self, threshold: f64) -> CoveragePoint {
        let mut covered = 0usize;
        let mut correct = 0usize;
        for s in &self.samples {
            if self.metric.covers(s.statistic, threshold) {
                covered += 1;
                correct += s.correct as usize;
            }
        }
        let total = self.samples.len();
        CoveragePoint {
            threshold,
            coverage: if total == 0 { 0.0 } else { covered as f64 / total as f64 },
            selective_accuracy: (covered > 0).then(|| correct as f64 / covered as f64),
        }
    }

    pub fn sweep(&self, thresholds: &Thresholds) -> Result<CoverageCurve> {
        let mut grid = match thresholds {
            Thresholds::Auto => self.distinct_values(),
            Thresholds::List(list) => {
                if list.is_empty() {
                    return Err(Error::EmptyInput("threshold list"));
                }
                if list.iter().any(|t| t.is_nan()) {
                    return Err(Error::InvalidConfig("NaN threshold".into()));
                }
                list.clone()
            }
        };
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(CoverageCurve {
            metric: self.metric,
            points: grid.into_iter().map(|t| self.point(t)).collect(),
        })
    }
}

pub fn coverage_sweep(
    test_set: &ActivationSet,
    model: &PadModel,
    metric: CoverageMetric,
    zmode: ZMode,
    thresholds: &Thresholds,
) -> Result<CoverageCurve> {
    if let Thresholds::List(l) = thresholds {
        if l.is_empty() {
            return Err(Error::EmptyInput("threshold list"));
        }
    }
    SampleStatistics::collect(test_set, model, metric, zmode)?.sweep(thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(values: &[f64], correct: &[bool], metric: CoverageMetric) -> SampleStatistics {
        SampleStatistics {
            metric,
            samples: values
                .iter()
                .zip(correct)
                .enumerate()
                .map(|(i, (&statistic, &correct))| SampleStatistic {
                    sample_id: i as u64,
                    statistic,
                    correct,
                })
                .collect(),
        }
    }

    #[test]
    fn four_record_kl_toy() {
        let s = stats(&[0.1, 0.2, 0.3, 0.4], &[true, true, false, true], CoverageMetric::Kl);
        let c = s.sweep(&Thresholds::List(vec![0.35, 0.25])).unwrap();
        assert_eq!(c.points[0].threshold, 0.25);
        assert_eq!(c.points[0].coverage, 0.5);
        assert_eq!(c.points[0].selective_accuracy, Some(1.0));
        assert_eq!(c.points[1].coverage, 0.75);
        assert_eq!(c.points[1].selective_accuracy, Some(2.0 / 3.0));
    }

    #[test]
    fn below_smallest_statistic_covers_nothing() {
        let s = stats(&[0.1, 0.2], &[true, false], CoverageMetric::Kl);
        let p = s.point(0.05);
        assert_eq!(p.coverage, 0.0);
        assert_eq!(p.selective_accuracy, None);
    }

    #[test]
    fn equality_is_covered() {
        let kl = stats(&[0.2], &[true], CoverageMetric::Kl);
        assert_eq!(kl.point(0.2).coverage, 1.0);
        let conf = stats(&[0.9], &[true], CoverageMetric::Confidence);
        assert_eq!(conf.point(0.9).coverage, 1.0);
        assert_eq!(conf.point(0.91).coverage, 0.0);
    }

    #[test]
    fn auto_grid_has_one_point_per_distinct_value() {
        let s = stats(&[0.3, 0.1, 0.3, 0.2], &[true; 4], CoverageMetric::Z);
        let c = s.sweep(&Thresholds::Auto).unwrap();
        let ts: Vec<f64> = c.points.iter().map(|p| p.threshold).collect();
        assert_eq!(ts, vec![0.1, 0.2, 0.3]);
        assert_eq!(c.points.last().unwrap().coverage, 1.0);
    }

    #[test]
    fn empty_threshold_list_is_rejected() {
        let s = stats(&[0.3], &[true], CoverageMetric::Z);
        assert_eq!(
            s.sweep(&Thresholds::List(vec![])),
            Err(Error::EmptyInput("threshold list"))
        );
    }
}
