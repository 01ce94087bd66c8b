//! Acceptance criteria. Each criterion prints one `[PASS]`/`[FAIL]` line;
//! the process exits non-zero if any failed.
//!
//! `cargo test -p pad-core --test acceptance`

mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use pad_core::demo::{run_demo, DemoConfig};
use pad_core::inference::evaluate_all;
use pad_core::io::{self, FormatError};
use pad_core::uncertainty::SampleStatistics;
use pad_core::{
    argmin_class, build_pad, evaluate, kl_scores, rejection_rate, z_scores, ActivationRecord, ActivationSet,
    CoverageMetric, OodConfig, OodStrategy, Strategy, Thresholds, ZMode,
};
use rand::Rng;

fn verdict(name: &str, ok: bool, detail: &str) -> bool {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

const EPS: f64 = pad_core::activation_model::DEFAULT_KL_EPSILON;
const FLOOR: f64 = pad_core::activation_model::DEFAULT_SIGMA_FLOOR;

fn pad_oracle_equivalence() -> bool {
    let start = Instant::now();
    let mut r = rng(0xAD01);
    let mut failures = Vec::new();
    for case in 0..100 {
        let (c, u, n) = random_dims(&mut r);
        let set = random_set(&mut r, c, u, n);
        let model = build_pad(&set, FLOOR, EPS).unwrap();
        let oracle = pad_oracle(&set);
        let close = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| rel_close(*x, *y, 1e-9))
        };
        if model.counts() != oracle.counts.as_slice()
            || !close(model.means(), &oracle.means)
            || !close(model.stds(), &oracle.stds)
        {
            failures.push(format!("case {case}: statistics differ"));
        }

        // Mutation: a misclassified record with wild activations changes nothing.
        let mut records = set.clone().into_records();
        let truth = r.random_range(0..c);
        let wrong = (truth + 1) % c;
        if c > 1 {
            let mut softmax = vec![0.0f32; c];
            softmax[wrong] = 1.0;
            records.push(ActivationRecord {
                sample_id: n as u64,
                activations: (0..u).map(|_| r.random_range(-50.0..50.0)).collect(),
                softmax: Some(softmax),
                predicted: Some(wrong),
                ground_truth: Some(truth),
            });
            let mutated = ActivationSet::new("random", u, c, records).unwrap();
            if build_pad(&mutated, FLOOR, EPS).unwrap() != model {
                failures.push(format!("case {case}: misclassified record changed the model"));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "PAD oracle equivalence (100 sets, 1e-9 rel, mutation)",
        failures.is_empty() && elapsed < Duration::from_secs(5),
        &format!("{} failures, {elapsed:?}", failures.len()),
    )
}

fn scoring_oracles() -> bool {
    let start = Instant::now();
    let mut r = rng(0x5C0E);
    let mut worst_kl = 0.0f64;
    let mut worst_z = 0.0f64;
    let mut failures = 0;
    for _ in 0..100 {
        let (c, u, n) = random_dims(&mut r);
        let set = random_set(&mut r, c, u, n);
        let model = build_pad(&set, FLOOR, EPS).unwrap();
        let test: Vec<f32> = (0..u).map(|_| r.random_range(-1.0..6.0)).collect();

        let kl = kl_scores(&model, &test).unwrap();
        let za = z_scores(&model, &test, ZMode::Absolute).unwrap();
        let zs = z_scores(&model, &test, ZMode::Signed).unwrap();
        for class in 0..c {
            let mean = &model.means()[class];
            let std = &model.stds()[class];
            let expect_kl = kl_oracle(&test, mean, EPS);
            let expect_za = z_oracle(&test, mean, std, FLOOR, false);
            let expect_zs = z_oracle(&test, mean, std, FLOOR, true);
            worst_kl = worst_kl.max((kl.values[class] - expect_kl).abs() / expect_kl.abs().max(1e-300));
            worst_z = worst_z.max((za.values[class] - expect_za).abs() / expect_za.abs().max(1e-300));
            if !rel_close(kl.values[class], expect_kl, 1e-9)
                || !rel_close(za.values[class], expect_za, 1e-9)
                || !rel_close(zs.values[class], expect_zs, 1e-9)
            {
                failures += 1;
            }
        }

        // Exact zero cases: a test vector equal to a class mean.
        let class = r.random_range(0..c);
        let at_mean: Vec<f32> = model.means()[class].iter().map(|&m| m as f32).collect();
        let exact = pad_core::PadModel::from_parts(
            "exact",
            u,
            1,
            vec![1],
            vec![at_mean.iter().map(|&v| v as f64).collect()],
            vec![model.stds()[class].clone()],
            FLOOR,
            EPS,
        )
        .unwrap();
        let zero_a = z_scores(&exact, &at_mean, ZMode::Absolute).unwrap().values[0];
        let zero_s = z_scores(&exact, &at_mean, ZMode::Signed).unwrap().values[0];
        let near_zero_kl = kl_scores(&exact, &at_mean).unwrap().values[0];
        if zero_a != 0.0 || zero_s != 0.0 || near_zero_kl >= 1e-6 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "Scoring oracles (100 cases, KL and Z both modes, 1e-9)",
        failures == 0 && elapsed < Duration::from_secs(5),
        &format!("{failures} failures, worst rel err KL {worst_kl:.2e} Z {worst_z:.2e}, {elapsed:?}"),
    )
}

fn published_table_argmin_replication() -> bool {
    // CIFAR-10 class order: airplane, automobile, bird, cat, deer, dog, frog,
    // horse, ship, truck.
    const AUTOMOBILE: usize = 1;
    const DOG: usize = 5;
    const TRUCK: usize = 9;
    let rows: [(&str, [f64; 10], [f64; 10], usize, usize); 4] = [
        (
            "MNIST digit 6",
            [2.223, 1.627, 1.653, 1.599, 1.539, 1.364, 1.073, 1.169, 1.181, 1.239],
            [1.987, 1.147, 1.062, 0.975, 0.881, 0.733, 0.594, 0.633, 0.636, 0.657],
            6,
            6,
        ),
        (
            "MNIST digit 9",
            [2.445, 2.038, 2.08, 1.566, 1.442, 1.207, 1.269, 1.188, 1.183, 1.125],
            [1.951, 1.321, 1.224, 0.877, 0.702, 0.58, 0.600, 0.567, 0.566, 0.547],
            9,
            9,
        ),
        (
            "CIFAR automobile",
            [2.465, 1.335, 3.798, 3.483, 4.373, 4.006, 3.849, 4.244, 1.396, 1.454],
            [1.951, 1.321, 1.224, 0.877, 0.702, 0.58, 0.600, 0.567, 0.566, 0.547],
            AUTOMOBILE,
            TRUCK,
        ),
        (
            "CIFAR dog",
            [2.223, 1.627, 1.653, 1.599, 1.539, 1.364, 1.073, 1.169, 1.181, 1.239],
            [1.987, 1.147, 1.062, 0.975, 0.881, 0.733, 0.594, 0.633, 0.636, 0.657],
            DOG,
            DOG,
        ),
    ];
    let mut all_ok = true;
    let mut detail = Vec::new();
    for (name, kl, z, want_kl, want_z) in rows {
        let got_kl = argmin_class(&kl).unwrap();
        let got_z = argmin_class(&z).unwrap();
        let ok = got_kl == want_kl && got_z == want_z;
        println!(
            "    {} {name}: min KL {got_kl} (table {want_kl}), min Z {got_z} (table {want_z})",
            if ok { "ok  " } else { "MISS" }
        );
        all_ok &= ok;
        detail.push(format!("{name}={}", if ok { "ok" } else { "miss" }));
    }
    verdict("Published score-table argmin replication", all_ok, &detail.join(", "))
}

fn strategy_bounds() -> bool {
    let mut r = rng(0xB0B0);
    let mut violations = Vec::new();
    for case in 0..50 {
        let (c, u, _) = random_dims(&mut r);
        let (n_train, n_test) = (r.random_range(c..=200), r.random_range(c..=200));
        let train = random_set(&mut r, c, u, n_train);
        let test = random_set(&mut r, c, u, n_test);
        let model = build_pad(&train, FLOOR, EPS).unwrap();
        for zmode in [ZMode::Absolute, ZMode::Signed] {
            let reports = evaluate_all(&test, &model, zmode).unwrap();
            let acc = |s: Strategy| reports.iter().find(|r| r.strategy == s).unwrap().strict_accuracy;
            let base = [acc(Strategy::Softmax), acc(Strategy::KlMin), acc(Strategy::ZMin)];
            let max = base.iter().copied().fold(f64::MIN, f64::max);
            let min = base.iter().copied().fold(f64::MAX, f64::min);
            if acc(Strategy::EnsOpt) < max || acc(Strategy::EnsAnd) > min {
                violations.push(format!("case {case} {zmode:?}"));
            }
        }
    }
    verdict(
        "Strategy bounds EnsOPT >= max, EnsAND <= min (50 sets)",
        violations.is_empty(),
        &format!("{} violations", violations.len()),
    )
}

fn coverage_monotonicity() -> bool {
    let mut r = rng(0xC0FE);
    let mut failures = Vec::new();
    for case in 0..30 {
        let (c, u, _) = random_dims(&mut r);
        let (n_train, n_test) = (r.random_range(c..=200), r.random_range(c..=200));
        let train = random_set(&mut r, c, u, n_train);
        let test = random_set(&mut r, c, u, n_test);
        let model = build_pad(&train, FLOOR, EPS).unwrap();
        for metric in [CoverageMetric::Confidence, CoverageMetric::Kl, CoverageMetric::Z] {
            let stats = SampleStatistics::collect(&test, &model, metric, ZMode::Absolute).unwrap();
            let mut grid = stats.distinct_values();
            grid.extend((0..20).map(|_| r.random_range(-0.5..8.0)));
            grid.sort_by(f64::total_cmp);
            // Order the grid from tightest to loosest.
            if metric == CoverageMetric::Confidence {
                grid.reverse();
            }
            let mut previous: BTreeSet<u64> = BTreeSet::new();
            for &t in &grid {
                let covered = stats.covered_at(t);
                if !previous.is_subset(&covered) {
                    failures.push(format!("case {case} {metric}: inclusion broken at {t}"));
                }
                previous = covered;
            }

            let accept_all = match metric {
                CoverageMetric::Confidence => 0.0,
                _ => *stats.distinct_values().last().unwrap(),
            };
            let point = stats.point(accept_all);
            let strategy = match metric {
                CoverageMetric::Confidence => Strategy::Softmax,
                CoverageMetric::Kl => Strategy::KlMin,
                CoverageMetric::Z => Strategy::ZMin,
            };
            let base = evaluate(strategy, &test, &model, ZMode::Absolute).unwrap();
            if point.coverage != 1.0 || point.selective_accuracy != Some(base.strict_accuracy) {
                failures.push(format!("case {case} {metric}: accept-all endpoint mismatch"));
            }
            let curve = stats.sweep(&Thresholds::Auto).unwrap();
            let monotone = curve.points.windows(2).all(|w| match metric {
                CoverageMetric::Confidence => w[1].coverage <= w[0].coverage,
                _ => w[1].coverage >= w[0].coverage,
            });
            if !monotone {
                failures.push(format!("case {case} {metric}: coverage not monotone"));
            }
        }
    }
    verdict(
        "Coverage monotonicity and accept-all endpoint (3 metrics)",
        failures.is_empty(),
        &format!("{} failures {:?}", failures.len(), failures.first()),
    )
}

fn ood_set_algebra() -> bool {
    let mut r = rng(0x00D5);
    let mut failures = 0;
    for _ in 0..50 {
        let (c, u, _) = random_dims(&mut r);
        let (n_train, n_test) = (r.random_range(c..=200), r.random_range(c..=200));
        let train = random_set(&mut r, c, u, n_train);
        let test = random_set(&mut r, c, u, n_test);
        let model = build_pad(&train, FLOOR, EPS).unwrap();
        let alpha = r.random_range(0.3..=1.0);
        let beta = r.random_range(0.01..3.0);
        let run = |s| rejection_rate(&test, &model, &OodConfig::new(alpha, beta, s).unwrap()).unwrap();
        let (s1, s2, s3) = (run(OodStrategy::S1), run(OodStrategy::S2), run(OodStrategy::S3));
        let intersection: BTreeSet<u64> = s1.rejected_ids.intersection(&s2.rejected_ids).copied().collect();
        if s3.rejected_ids != intersection || s3.rejection_rate > s1.rejection_rate.min(s2.rejection_rate) {
            failures += 1;
        }
    }
    verdict("OOD set algebra S3 == S1 ∩ S2 (50 sets)", failures == 0, &format!("{failures} failures"))
}

fn desk_scale_demo() -> bool {
    let start = Instant::now();
    let cfg = DemoConfig::default();
    assert_eq!((cfg.seed, cfg.n_classes, cfg.hidden, cfg.epochs, cfg.spread), (7, 3, 16, 30, 0.5));
    assert_eq!((cfg.n_classes * cfg.n_per_class_train, cfg.n_classes * cfg.n_per_class_test), (600, 300));
    assert_eq!(cfg.ood_shift_sigmas, 5.0);
    assert_eq!(cfg.beta_quantile, 0.9);

    let out = run_demo(&cfg).unwrap();
    let again = run_demo(&cfg).unwrap();
    let elapsed = start.elapsed();

    let acc = |s: Strategy| out.reports.iter().find(|r| r.strategy == s).unwrap().strict_accuracy;
    let softmax = acc(Strategy::Softmax);
    let kl = acc(Strategy::KlMin);
    let z = acc(Strategy::ZMin);
    let s2_in = out.in_distribution[1].rejection_rate;
    let s2_ood = out.out_of_distribution[1].rejection_rate;
    assert_eq!(out.in_distribution[1].strategy, OodStrategy::S2);

    let checks = [
        ("softmax >= 0.90", softmax >= 0.90),
        ("|KL - softmax| <= 0.08", (kl - softmax).abs() <= 0.08),
        ("|Z - softmax| <= 0.08", (z - softmax).abs() <= 0.08),
        ("S2 shifted rejection >= 0.90", s2_ood >= 0.90),
        ("S2 in-distribution rejection <= 0.20", s2_in <= 0.20),
        ("deterministic", out == again),
        ("runtime < 60 s", elapsed < Duration::from_secs(60)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    verdict(
        "Desk-scale demo (seed 7)",
        failed.is_empty(),
        &format!(
            "softmax {softmax}, KL {kl}, Z {z}, beta {:.4}, S2 in {s2_in:.4}, S2 shifted {s2_ood:.4}, {elapsed:?}, failed {failed:?}",
            out.beta
        ),
    )
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn format_conformance() -> bool {
    let mut failures = Vec::new();

    for name in ["toy.padact", "toy_unlabeled.padact", "empty.padact"] {
        let bytes = std::fs::read(golden(name)).unwrap();
        let set = io::read_padact(&bytes[..]).unwrap();
        let mut again = Vec::new();
        io::write_padact(&mut again, &set).unwrap();
        if again != bytes {
            failures.push(format!("{name}: rewrite not byte-exact"));
        }
    }
    let empty = std::fs::read(golden("empty.padact")).unwrap();
    if empty.len() != 8 + 2 + "dense_1".len() + 8 + 4 + 4 + 1 {
        failures.push("empty.padact size".into());
    }

    // CSV and binary goldens describe the same records.
    let bin = io::read_padact(&std::fs::read(golden("toy.padact")).unwrap()[..]).unwrap();
    let csv_bytes = std::fs::read(golden("toy.csv")).unwrap();
    let csv = io::read_activation_csv(&csv_bytes[..], "dense_1").unwrap();
    if csv != bin {
        failures.push("toy.csv differs from toy.padact".into());
    }
    let mut csv_again = Vec::new();
    io::write_activation_csv(&mut csv_again, &csv).unwrap();
    if csv_again != csv_bytes {
        failures.push("toy.csv rewrite not byte-exact".into());
    }

    // Every malformed-input class maps to its own error.
    let toy = std::fs::read(golden("toy.padact")).unwrap();
    let mut bad_magic = toy.clone();
    bad_magic[6..8].copy_from_slice(b"99");
    let mut bad_flags = toy.clone();
    bad_flags[8 + 2 + 7 + 16] |= 0x80;
    let mut trailing = toy.clone();
    trailing.extend_from_slice(&[0, 0, 0, 0]);
    let header = b"sample_id,label,prediction,conf_0,conf_1,act_0,act_1\n";
    let ragged = [&header[..], b"0,0,0,0.5,0.5,1\n"].concat();
    let unparsable = [&header[..], b"0,0,0,0.5,0.5,1,x\n"].concat();
    let bad_header = b"sample_id,label,pred,conf_0,act_0\n".to_vec();
    let cases: Vec<(&str, Result<ActivationSet, FormatError>, fn(&FormatError) -> bool)> = vec![
        ("BadMagic", io::read_padact(&bad_magic[..]), |e| matches!(e, FormatError::BadMagic(_))),
        ("TruncatedFile", io::read_padact(&toy[..toy.len() - 3]), |e| matches!(e, FormatError::TruncatedFile { .. })),
        ("FlagMismatch", io::read_padact(&bad_flags[..]), |e| matches!(e, FormatError::FlagMismatch(_))),
        ("ShapeMismatch", io::read_padact(&trailing[..]), |e| matches!(e, FormatError::ShapeMismatch(_))),
        ("HeaderMismatch", io::read_activation_csv(&bad_header[..], "l"), |e| matches!(e, FormatError::HeaderMismatch(_))),
        ("RaggedRow", io::read_activation_csv(&ragged[..], "l"), |e| matches!(e, FormatError::RaggedRow { .. })),
        ("ParseError", io::read_activation_csv(&unparsable[..], "l"), |e| matches!(e, FormatError::ParseError { .. })),
    ];
    for (name, result, is_expected) in cases {
        match result {
            Err(e) if is_expected(&e) => {}
            other => failures.push(format!("{name}: got {other:?}")),
        }
    }

    let model = build_pad(&bin, FLOOR, EPS).unwrap();
    let mut doc = Vec::new();
    io::write_pad_model(&mut doc, &model).unwrap();
    if io::read_pad_model(&doc[..]).unwrap() != model {
        failures.push("PAD model JSON round trip".into());
    }
    let v2 = String::from_utf8(doc).unwrap().replacen("\"version\": 1", "\"version\": 2", 1);
    if !matches!(io::read_pad_model(v2.as_bytes()), Err(FormatError::UnsupportedVersion(2))) {
        failures.push("UnsupportedVersion".into());
    }
    let bad_weights = r#"{"version": 1, "layers": [{"name": "h", "type": "dense", "activation": "relu",
        "in_dim": 2, "out_dim": 1, "weights": [[1.0]], "bias": [0.0]}]}"#;
    if !matches!(io::read_weights(bad_weights.as_bytes()), Err(FormatError::SchemaError(_))) {
        failures.push("SchemaError".into());
    }

    verdict(
        "Format conformance (golden PADACT01/CSV, malformed inputs)",
        failures.is_empty(),
        &format!("{failures:?}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> bool); 8] = [
        ("pad_oracle_equivalence", pad_oracle_equivalence),
        ("scoring_oracles", scoring_oracles),
        ("published_table_argmin_replication", published_table_argmin_replication),
        ("strategy_bounds", strategy_bounds),
        ("coverage_monotonicity", coverage_monotonicity),
        ("ood_set_algebra", ood_set_algebra),
        ("desk_scale_demo", desk_scale_demo),
        ("format_conformance", format_conformance),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let ok = std::panic::catch_unwind(run).unwrap_or_else(|_| {
            println!("[FAIL] {name}: panicked");
            false
        });
        if !ok {
            failed.push(name);
        }
    }
    println!("\nacceptance: {} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
