//! CSV renderings of scores, decisions, evaluation reports, coverage curves
//! and OOD rejection reports.
//!
//! Fields are numeric or fixed tokens, so no quoting is ever needed. Floats
//! use shortest round-trip formatting; absent values are empty fields.

use std::io::Write;

use super::FormatResult;
use crate::inference::{Decision, EvaluationReport};
use crate::ood::RejectionReport;
use crate::scoring::ScoreVector;
use crate::uncertainty::CoverageCurve;

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `sample_id,score_0..score_{C-1},argmin`
pub fn write_scores_csv<W: Write>(mut w: W, n_classes: usize, rows: &[(u64, ScoreVector)]) -> FormatResult<()> {
    let mut header = vec!["sample_id".to_string()];
    header.extend((0..n_classes).map(|c| format!("score_{c}")));
    header.push("argmin".into());
    writeln!(w, "{}", header.join(","))?;
    for (id, s) in rows {
        let mut fields = vec![id.to_string()];
        fields.extend(s.values.iter().map(f64::to_string));
        fields.push(opt(s.argmin()));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// `sample_id,ground_truth,decision`; abstentions are written as `ABSTAIN`.
pub fn write_decisions_csv<W: Write>(mut w: W, rows: &[(u64, Option<usize>, Decision)]) -> FormatResult<()> {
    writeln!(w, "sample_id,ground_truth,decision")?;
    for (id, truth, d) in rows {
        writeln!(w, "{id},{},{d}", opt(*truth))?;
    }
    Ok(())
}

pub const EVALUATION_HEADER: &str =
    "strategy,n_samples,n_correct,n_abstained,strict_accuracy,selective_accuracy";

pub fn evaluation_row(r: &EvaluationReport) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.strategy,
        r.n_samples,
        r.n_correct,
        r.n_abstained,
        r.strict_accuracy,
        opt(r.selective_accuracy)
    )
}

pub fn write_evaluation_csv<W: Write>(mut w: W, reports: &[EvaluationReport]) -> FormatResult<()> {
    writeln!(w, "{EVALUATION_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", evaluation_row(r))?;
    }
    Ok(())
}

/// `threshold,coverage,selective_accuracy`
pub fn write_coverage_csv<W: Write>(mut w: W, curve: &CoverageCurve) -> FormatResult<()> {
    writeln!(w, "threshold,coverage,selective_accuracy")?;
    for p in &curve.points {
        writeln!(w, "{},{},{}", p.threshold, p.coverage, opt(p.selective_accuracy))?;
    }
    Ok(())
}

pub const REJECTION_HEADER: &str = "strategy,alpha,beta,n_samples,n_rejected,rejection_rate";

pub fn write_rejection_csv<W: Write>(mut w: W, reports: &[RejectionReport]) -> FormatResult<()> {
    writeln!(w, "{REJECTION_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.strategy.name().to_ascii_uppercase(),
            r.alpha,
            r.beta,
            r.n_samples,
            r.n_rejected,
            r.rejection_rate
        )?;
    }
    Ok(())
}

/// One rejected sample id per line under a `sample_id` header.
pub fn write_rejected_ids<W: Write>(mut w: W, report: &RejectionReport) -> FormatResult<()> {
    writeln!(w, "sample_id")?;
    for id in &report.rejected_ids {
        writeln!(w, "{id}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::Strategy;
    use crate::scoring::ScoreMetric;
    use crate::uncertainty::{CoverageMetric, CoveragePoint};

    #[test]
    fn scores_layout() {
        let mut buf = Vec::new();
        let rows = vec![(3, ScoreVector { metric: ScoreMetric::Kl, values: vec![0.5, 0.25] })];
        write_scores_csv(&mut buf, 2, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sample_id,score_0,score_1,argmin\n3,0.5,0.25,1\n");
        let mut empty = Vec::new();
        write_scores_csv(&mut empty, 1, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "sample_id,score_0,argmin\n");
    }

    #[test]
    fn abstain_and_null_fields() {
        let mut buf = Vec::new();
        write_decisions_csv(&mut buf, &[(0, Some(1), Decision::Abstain), (1, None, Decision::Label(2))]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sample_id,ground_truth,decision\n0,1,ABSTAIN\n1,,2\n");

        let curve = CoverageCurve {
            metric: CoverageMetric::Kl,
            points: vec![CoveragePoint { threshold: 0.1, coverage: 0.0, selective_accuracy: None }],
        };
        let mut buf = Vec::new();
        write_coverage_csv(&mut buf, &curve).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "threshold,coverage,selective_accuracy\n0.1,0,\n");

        let r = EvaluationReport {
            strategy: Strategy::EnsAnd,
            n_samples: 2,
            n_correct: 0,
            n_abstained: 2,
            strict_accuracy: 0.0,
            selective_accuracy: None,
        };
        assert_eq!(evaluation_row(&r), "ens-and,2,0,2,0,");
    }
}
