//! Desk-scale end-to-end run on synthetic data: Gaussian blobs, a one-hidden
//! layer MLP, PAD construction on the hidden layer, every inference strategy,
//! and an OOD check against shifted blobs.

use crate::activation_model::{build_pad, ActivationRecord, ActivationSet, PadModel};
use crate::error::Result;
use crate::inference::{evaluate_all, EvaluationReport};
use crate::nnet::{accuracy, forward, gen_synthetic, hidden_layer_name, train_mlp, Dataset, NetworkSpec, TrainConfig};
use crate::ood::{ood_statistics, percentile, rejection_rate, OodConfig, OodStrategy, RejectionReport, DEFAULT_ALPHA};
use crate::scoring::ZMode;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub seed: u64,
    pub n_classes: usize,
    pub n_features: usize,
    pub n_per_class_train: usize,
    pub n_per_class_test: usize,
    pub spread: f64,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// OOD inputs are test rows with `ood_shift_sigmas * spread` added to every feature.
    pub ood_shift_sigmas: f64,
    /// Quantile of in-distribution training min-KL used as the S2/S3 threshold.
    pub beta_quantile: f64,
    pub alpha: f64,
    pub zmode: ZMode,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_classes: 3,
            n_features: 4,
            n_per_class_train: 200,
            n_per_class_test: 100,
            spread: 0.5,
            hidden: 16,
            epochs: 30,
            learning_rate: 0.05,
            batch_size: 32,
            ood_shift_sigmas: 5.0,
            beta_quantile: 0.9,
            alpha: DEFAULT_ALPHA,
            zmode: ZMode::Absolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoOutcome {
    pub train_data: Dataset,
    pub test_data: Dataset,
    pub network: NetworkSpec,
    pub network_test_accuracy: f64,
    pub train_set: ActivationSet,
    pub test_set: ActivationSet,
    pub ood_set: ActivationSet,
    pub model: PadModel,
    pub reports: Vec<EvaluationReport>,
    pub beta: f64,
    /// One report per strategy, on the in-distribution test set.
    pub in_distribution: Vec<RejectionReport>,
    /// One report per strategy, on the shifted set.
    pub out_of_distribution: Vec<RejectionReport>,
}

/// Runs `data` through `net`, capturing `layer`. Records keep their row
/// index as sample id; labels are attached when `labeled`.
pub fn capture_activations(net: &NetworkSpec, data: &Dataset, layer: &str, labeled: bool) -> Result<ActivationSet> {
    let mut records = Vec::with_capacity(data.len());
    for (i, (x, &y)) in data.features().iter().zip(data.labels()).enumerate() {
        let mut out = forward(net, x, &[layer])?;
        let activations = out.captured.remove(layer).unwrap_or_default();
        let predicted = crate::activation_model::argmax(&out.output);
        records.push(ActivationRecord {
            sample_id: i as u64,
            activations,
            softmax: Some(out.output),
            predicted,
            ground_truth: labeled.then_some(y),
        });
    }
    let n_units = net.layer(layer).map_or(0, |l| l.out_dim);
    ActivationSet::new(layer, n_units, net.output_dim(), records)
}

pub fn run_demo(cfg: &DemoConfig) -> Result<DemoOutcome> {
    let (train_data, test_data) = gen_synthetic(
        cfg.n_classes,
        cfg.n_features,
        cfg.n_per_class_train,
        cfg.n_per_class_test,
        cfg.spread,
        cfg.seed,
    )?;
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
    };
    let network = train_mlp(&train_data, &[cfg.hidden], &train_cfg)?;
    let network_test_accuracy = accuracy(&network, &test_data)?;

    let layer = hidden_layer_name(0);
    let train_set = capture_activations(&network, &train_data, &layer, true)?;
    let test_set = capture_activations(&network, &test_data, &layer, true)?;
    let shifted = test_data.shifted((cfg.ood_shift_sigmas * cfg.spread) as f32);
    let ood_set = capture_activations(&network, &shifted, &layer, false)?;

    let model = build_pad(
        &train_set,
        crate::activation_model::DEFAULT_SIGMA_FLOOR,
        crate::activation_model::DEFAULT_KL_EPSILON,
    )?;
    let reports = evaluate_all(&test_set, &model, cfg.zmode)?;

    let train_kl: Vec<f64> = ood_statistics(&train_set, &model, false)?
        .into_iter()
        .map(|(_, _, kl)| kl)
        .collect();
    let beta = percentile(&train_kl, cfg.beta_quantile)
        .unwrap_or(f64::MIN_POSITIVE)
        .max(f64::MIN_POSITIVE);

    let mut in_distribution = Vec::new();
    let mut out_of_distribution = Vec::new();
    for strategy in OodStrategy::ALL {
        let ood_cfg = OodConfig::new(cfg.alpha, beta, strategy)?;
        in_distribution.push(rejection_rate(&test_set, &model, &ood_cfg)?);
        out_of_distribution.push(rejection_rate(&ood_set, &model, &ood_cfg)?);
    }

    Ok(DemoOutcome {
        train_data,
        test_data,
        network,
        network_test_accuracy,
        train_set,
        test_set,
        ood_set,
        model,
        reports,
        beta,
        in_distribution,
        out_of_distribution,
    })
}
