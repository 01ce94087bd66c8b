//! Per-class activation distributions (PADs) for classifier introspection.
//!
//! The pipeline:
//!
//! 1. [`activation_model::build_pad`] summarises a hidden layer's activations
//!    per class and per unit, using only correctly classified training records.
//! 2. [`scoring`] compares a test activation vector against every class with a
//!    KL-score and a pseudo Z-score (lower is a better fit).
//! 3. [`inference`] turns the scores into alternative classifiers and
//!    ensembles, [`uncertainty`] sweeps coverage against accuracy, and [`ood`]
//!    applies confidence/KL rejection rules for out-of-distribution inputs.
//!
//! [`nnet`] is a small dense network with activation capture so the whole
//! pipeline runs without an external framework, and [`io`] holds the file
//! formats (PADACT01 binary dumps, CSV, JSON).

pub mod activation_model;
pub mod demo;
pub mod error;
pub mod inference;
pub mod io;
pub mod nnet;
pub mod ood;
pub mod scoring;
pub mod uncertainty;

pub use activation_model::{build_pad, class_firing_histogram, ActivationRecord, ActivationSet, FiringHistogram, PadModel};
pub use error::{Error, Result};
pub use inference::{classify, evaluate, Decision, EvaluationReport, Strategy};
pub use ood::{ood_decide, rejection_rate, OodConfig, OodDecision, OodStrategy, RejectionReport};
pub use scoring::{argmin_class, kl_scores, score_profile, z_scores, ScoreMetric, ScoreProfile, ScoreVector, Scorer, ZMode};
pub use uncertainty::{coverage_sweep, CoverageCurve, CoverageMetric, CoveragePoint, Thresholds};
