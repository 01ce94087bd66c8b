use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use pad_core::demo::{capture_activations, run_demo, DemoConfig};
use pad_core::inference::evaluate_detailed;
use pad_core::io::{
    self, read_activation_file, read_dataset_csv, read_pad_model, read_weights, reports, write_dataset_csv,
    write_pad_model, write_weights,
};
use pad_core::nnet::{train_mlp, TrainConfig};
use pad_core::{build_pad, ActivationSet, OodConfig, OodStrategy, PadModel, ScoreMetric, Scorer, Thresholds};

use crate::output::{with_path, write_atomic, write_rendered, CliError};
use crate::{
    BuildArgs, CoverageArgs, CoverageMetricArg, DemoArgs, ForwardArgs, InferArgs, MetricArg, OodArgs,
    OodStrategyArg, ScoreArgs, SynthArgs, TrainArgs,
};

fn load_set(path: &Path) -> Result<ActivationSet, CliError> {
    with_path(path, read_activation_file(path))
}

fn load_model(path: &Path) -> Result<PadModel, CliError> {
    let file = with_path(path, File::open(path))?;
    with_path(path, read_pad_model(BufReader::new(file)))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be a positive number, got {v}")))
    }
}

pub fn parse_thresholds(raw: &str) -> Result<Thresholds, CliError> {
    if raw.trim() == "auto" {
        return Ok(Thresholds::Auto);
    }
    let list = raw
        .split(',')
        .map(|t| t.trim().parse::<f64>().ok().filter(|v| !v.is_nan()))
        .collect::<Option<Vec<_>>>()
        .filter(|l| !l.is_empty())
        .ok_or_else(|| CliError::Usage(format!("--thresholds must be `auto` or a list of numbers, got {raw:?}")))?;
    Ok(Thresholds::List(list))
}

fn parse_hidden(raw: &str) -> Result<Vec<usize>, CliError> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|t| t.trim().parse::<usize>().ok().filter(|&w| w > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Usage(format!("--hidden must be a list of positive widths, got {raw:?}")))
}

pub fn build(a: BuildArgs) -> Result<(), CliError> {
    let sigma_floor = positive("sigma-floor", a.sigma_floor)?;
    let kl_epsilon = positive("kl-epsilon", a.kl_epsilon)?;
    let set = load_set(&a.activations)?;
    let model = build_pad(&set, sigma_floor, kl_epsilon)?;
    write_rendered(&a.out, |buf| write_pad_model(buf, &model))?;
    println!("layer {:?}: {} units, {} classes", model.layer_name(), model.n_units(), model.n_classes());
    for (c, n) in model.counts().iter().enumerate() {
        println!("class {c}: {n}");
    }
    Ok(())
}

pub fn score(a: ScoreArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let set = load_set(&a.activations)?;
    let metric = match a.metric {
        MetricArg::Kl => ScoreMetric::Kl,
        MetricArg::Z => ScoreMetric::Z,
    };
    let scorer = Scorer::new(&model);
    let batch: Vec<&[f32]> = set.records().iter().map(|r| r.activations.as_slice()).collect();
    let scores = scorer.scores_batch(&batch, metric, a.zmode.into())?;
    let rows: Vec<_> = set.records().iter().map(|r| r.sample_id).zip(scores).collect();
    write_rendered(&a.out, |buf| reports::write_scores_csv(buf, model.n_classes(), &rows))
}

pub fn infer(a: InferArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let set = load_set(&a.activations)?;
    let eval = evaluate_detailed(a.strategy.into(), &set, &model, a.zmode.into())?;
    let rows: Vec<_> = set
        .records()
        .iter()
        .zip(&eval.decisions)
        .map(|(r, (id, d))| (*id, r.ground_truth, *d))
        .collect();
    let summary = format!("{}\n{}\n", reports::EVALUATION_HEADER, reports::evaluation_row(&eval.report));
    write_rendered(&a.report, |buf| reports::write_decisions_csv(buf, &rows))?;
    if let Some(path) = &a.summary {
        write_atomic(path, summary.as_bytes())?;
    }
    print!("{summary}");
    Ok(())
}

pub fn coverage(a: CoverageArgs) -> Result<(), CliError> {
    let thresholds = parse_thresholds(&a.thresholds)?;
    let model = load_model(&a.model)?;
    let set = load_set(&a.activations)?;
    let metric = match a.metric {
        CoverageMetricArg::Confidence => pad_core::CoverageMetric::Confidence,
        CoverageMetricArg::Kl => pad_core::CoverageMetric::Kl,
        CoverageMetricArg::Z => pad_core::CoverageMetric::Z,
    };
    let curve = pad_core::coverage_sweep(&set, &model, metric, a.zmode.into(), &thresholds)?;
    write_rendered(&a.out, |buf| reports::write_coverage_csv(buf, &curve))
}

pub fn ood(a: OodArgs) -> Result<(), CliError> {
    let strategy = match a.strategy {
        OodStrategyArg::S1 => OodStrategy::S1,
        OodStrategyArg::S2 => OodStrategy::S2,
        OodStrategyArg::S3 => OodStrategy::S3,
    };
    let config = OodConfig::new(a.alpha, a.beta, strategy).map_err(|e| CliError::Usage(e.to_string()))?;
    let model = load_model(&a.model)?;
    let set = load_set(&a.activations)?;
    let report = pad_core::rejection_rate(&set, &model, &config)?;
    write_rendered(&a.out, |buf| reports::write_rejection_csv(buf, std::slice::from_ref(&report)))?;
    if let Some(path) = &a.rejected_ids {
        write_rendered(path, |buf| reports::write_rejected_ids(buf, &report))?;
    }
    println!(
        "{}: rejected {}/{} ({})",
        strategy.name().to_ascii_uppercase(),
        report.n_rejected,
        report.n_samples,
        report.rejection_rate
    );
    Ok(())
}

pub fn net_synth(a: SynthArgs) -> Result<(), CliError> {
    if !(a.spread >= 0.0 && a.spread.is_finite()) {
        return Err(CliError::Usage(format!("--spread must be non-negative, got {}", a.spread)));
    }
    let (train, test) =
        pad_core::nnet::gen_synthetic(a.classes, a.features, a.train_per_class, a.test_per_class, a.spread, a.seed)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    write_rendered(&a.train_out, |buf| write_dataset_csv(buf, &train))?;
    write_rendered(&a.test_out, |buf| write_dataset_csv(buf, &test))
}

pub fn net_train(a: TrainArgs) -> Result<(), CliError> {
    let hidden = parse_hidden(&a.hidden)?;
    let config = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let file = with_path(&a.data, File::open(&a.data))?;
    let data = with_path(&a.data, read_dataset_csv(BufReader::new(file), None))?;
    let net = train_mlp(&data, &hidden, &config)?;
    write_rendered(&a.out, |buf| write_weights(buf, &net))?;
    println!("training accuracy {}", pad_core::nnet::accuracy(&net, &data)?);
    Ok(())
}

pub fn net_forward(a: ForwardArgs) -> Result<(), CliError> {
    let file = with_path(&a.weights, File::open(&a.weights))?;
    let net = with_path(&a.weights, read_weights(BufReader::new(file)))?;
    let file = with_path(&a.data, File::open(&a.data))?;
    let data = with_path(&a.data, read_dataset_csv(BufReader::new(file), Some(net.output_dim())))?;
    let set = capture_activations(&net, &data, &a.layer, !a.unlabeled)?;
    write_rendered(&a.out, |buf| {
        buf.extend(io::encode_activation_file(&a.out, &set)?);
        Ok(())
    })
}

pub fn demo(a: DemoArgs) -> Result<(), CliError> {
    let cfg = DemoConfig {
        seed: a.seed,
        ..DemoConfig::default()
    };
    let out = run_demo(&cfg)?;
    let dir = &a.out_dir;
    with_path(dir, std::fs::create_dir_all(dir))?;

    write_rendered(&dir.join("train.csv"), |b| write_dataset_csv(b, &out.train_data))?;
    write_rendered(&dir.join("test.csv"), |b| write_dataset_csv(b, &out.test_data))?;
    write_rendered(&dir.join("weights.json"), |b| write_weights(b, &out.network))?;
    for (name, set) in [("train.padact", &out.train_set), ("test.padact", &out.test_set), ("ood.padact", &out.ood_set)] {
        write_rendered(&dir.join(name), |b| io::write_padact(b, set))?;
    }
    write_rendered(&dir.join("pad_model.json"), |b| write_pad_model(b, &out.model))?;
    write_rendered(&dir.join("accuracy.csv"), |b| reports::write_evaluation_csv(b, &out.reports))?;
    write_rendered(&dir.join("ood_in_distribution.csv"), |b| {
        reports::write_rejection_csv(b, &out.in_distribution)
    })?;
    write_rendered(&dir.join("ood_shifted.csv"), |b| {
        reports::write_rejection_csv(b, &out.out_of_distribution)
    })?;

    println!("seed {}: network test accuracy {}", cfg.seed, out.network_test_accuracy);
    println!("{}", reports::EVALUATION_HEADER);
    for r in &out.reports {
        println!("{}", reports::evaluation_row(r));
    }
    println!("beta (p{:.0} of training min-KL) = {}", cfg.beta_quantile * 100.0, out.beta);
    for (i, o) in out.in_distribution.iter().zip(&out.out_of_distribution) {
        println!(
            "{}: in-distribution rejection {}, shifted rejection {}",
            i.strategy.name().to_ascii_uppercase(),
            i.rejection_rate,
            o.rejection_rate
        );
    }
    println!("outputs written to {}", dir.display());
    Ok(())
}
