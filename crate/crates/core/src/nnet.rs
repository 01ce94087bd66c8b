//! A small dense feedforward network with activation capture, a
//! deterministic SGD trainer and a Gaussian-blob dataset generator.
//!
//! Weights and activations are stored as `f32`; dot products and gradient
//! sums accumulate in `f64`.
//!
//! Randomness: every random draw comes from a `ChaCha8Rng` seeded with
//! `seed_from_u64(seed)`. Initialisation draws layer by layer, row-major,
//! `U(-1/sqrt(in_dim), 1/sqrt(in_dim))` for weights (biases start at zero);
//! each epoch then draws one Fisher-Yates shuffle of the sample order.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "softmax" => Some(Activation::Softmax),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `[out_dim][in_dim]`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub activation: Activation,
}

impl DenseLayer {
    fn row(&self, j: usize) -> &[f32] {
        &self.weights[j * self.in_dim..(j + 1) * self.in_dim]
    }

    fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|j| {
                self.row(j)
                    .iter()
                    .zip(input)
                    .fold(self.bias[j] as f64, |acc, (&w, &x)| acc + w as f64 * x)
            })
            .collect()
    }
}

fn apply_activation(activation: Activation, mut z: Vec<f64>) -> Vec<f64> {
    match activation {
        Activation::Identity => z,
        Activation::Relu => {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
            z
        }
        Activation::Softmax => {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            z.iter_mut().for_each(|v| *v = (*v - max).exp());
            let total: f64 = z.iter().sum();
            z.iter_mut().for_each(|v| *v /= total);
            z
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    layers: Vec<DenseLayer>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            check_len("layer weights", l.in_dim * l.out_dim, l.weights.len())?;
            check_len("layer bias", l.out_dim, l.bias.len())?;
            if i > 0 {
                check_len("layer input", layers[i - 1].out_dim, l.in_dim)?;
            }
            if l.activation == Activation::Softmax && i + 1 != layers.len() {
                return Err(Error::InvalidConfig(format!(
                    "softmax on non-final layer {:?}",
                    l.name
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if layers[..i].iter().any(|o| o.name == l.name) {
                return Err(Error::InvalidConfig(format!("duplicate layer name {:?}", l.name)));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn layer(&self, name: &str) -> Option<&DenseLayer> {
        self.layers.iter().find(|l| l.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Output of the final layer (the softmax vector for classifier nets).
    pub output: Vec<f32>,
    /// Post-activation values of each requested layer.
    pub captured: BTreeMap<String, Vec<f32>>,
}

pub fn forward(net: &NetworkSpec, input: &[f32], capture_layers: &[&str]) -> Result<ForwardOutput> {
    check_len("network input", net.input_dim(), input.len())?;
    if let Some(unknown) = capture_layers.iter().find(|n| net.layer(n).is_none()) {
        return Err(Error::UnknownLayer(unknown.to_string()));
    }
    let mut captured = BTreeMap::new();
    let mut x: Vec<f64> = input.iter().map(|&v| v as f64).collect();
    for layer in &net.layers {
        x = apply_activation(layer.activation, layer.pre_activation(&x));
        if capture_layers.contains(&layer.name.as_str()) {
            captured.insert(layer.name.clone(), x.iter().map(|&v| v as f32).collect());
        }
    }
    Ok(ForwardOutput {
        output: x.into_iter().map(|v| v as f32).collect(),
        captured,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f32>>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f32>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        check_len("dataset labels", features.len(), labels.len())?;
        if let Some(first) = features.first() {
            for row in &features {
                check_len("dataset row", first.len(), row.len())?;
            }
        }
        if let Some(&index) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidClass { index, n_classes });
        }
        Ok(Self {
            features,
            labels,
            n_classes,
        })
    }

    pub fn features(&self) -> &[Vec<f32>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Copy with `offset` added to every feature.
    pub fn shifted(&self, offset: f32) -> Self {
        Self {
            features: self
                .features
                .iter()
                .map(|r| r.iter().map(|v| v + offset).collect())
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

pub fn hidden_layer_name(index: usize) -> String {
    format!("hidden_{index}")
}

pub const OUTPUT_LAYER_NAME: &str = "output";

fn init_network(n_features: usize, hidden_dims: &[usize], n_classes: usize, rng: &mut ChaCha8Rng) -> NetworkSpec {
    let mut dims = vec![n_features];
    dims.extend_from_slice(hidden_dims);
    dims.push(n_classes);
    let n_layers = dims.len() - 1;
    let layers = (0..n_layers)
        .map(|i| {
            let (in_dim, out_dim) = (dims[i], dims[i + 1]);
            let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
            let weights = (0..in_dim * out_dim)
                .map(|_| rng.random_range(-bound..=bound) as f32)
                .collect();
            let last = i + 1 == n_layers;
            DenseLayer {
                name: if last {
                    OUTPUT_LAYER_NAME.to_string()
                } else {
                    hidden_layer_name(i)
                },
                in_dim,
                out_dim,
                weights,
                bias: vec![0.0; out_dim],
                activation: if last { Activation::Softmax } else { Activation::Relu },
            }
        })
        .collect();
    NetworkSpec { layers }
}

/// Mean cross-entropy of `net` on `data`.
pub fn cross_entropy(net: &NetworkSpec, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let mut total = 0.0;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        let out = forward(net, x, &[])?.output;
        total -= (out[y] as f64).max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / data.len() as f64)
}

/// Fraction of rows whose output argmax equals the label.
pub fn accuracy(net: &NetworkSpec, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let mut correct = 0usize;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        let out = forward(net, x, &[])?.output;
        correct += (crate::activation_model::argmax(&out) == Some(y)) as usize;
    }
    Ok(correct as f64 / data.len() as f64)
}

struct Gradients {
    weights: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(net: &NetworkSpec) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.out_dim]).collect(),
        }
    }

    /// Accumulates the cross-entropy gradient of one sample.
    fn accumulate(&mut self, net: &NetworkSpec, x: &[f32], y: usize) {
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(net.layers.len());
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(net.layers.len());
        let mut a: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        for layer in &net.layers {
            let z = layer.pre_activation(&a);
            inputs.push(std::mem::replace(&mut a, apply_activation(layer.activation, z.clone())));
            pre.push(z);
        }

        // Softmax + cross-entropy: dL/dz = p - onehot(y).
        let mut delta = a;
        delta[y] -= 1.0;
        for (li, layer) in net.layers.iter().enumerate().rev() {
            let input = &inputs[li];
            let gw = &mut self.weights[li];
            for (j, &d) in delta.iter().enumerate() {
                self.bias[li][j] += d;
                let row = &mut gw[j * layer.in_dim..(j + 1) * layer.in_dim];
                for (g, &xi) in row.iter_mut().zip(input) {
                    *g += d * xi;
                }
            }
            if li == 0 {
                break;
            }
            let below = &net.layers[li - 1];
            let mut next = vec![0.0; layer.in_dim];
            for (j, &d) in delta.iter().enumerate() {
                for (n, &w) in next.iter_mut().zip(layer.row(j)) {
                    *n += w as f64 * d;
                }
            }
            if below.activation == Activation::Relu {
                for (n, &z) in next.iter_mut().zip(&pre[li - 1]) {
                    if z <= 0.0 {
                        *n = 0.0;
                    }
                }
            }
            delta = next;
        }
    }

    fn apply(self, net: &mut NetworkSpec, step: f64) {
        for ((layer, gw), gb) in net.layers.iter_mut().zip(self.weights).zip(self.bias) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w = (*w as f64 - step * g) as f32;
            }
            for (b, g) in layer.bias.iter_mut().zip(gb) {
                *b = (*b as f64 - step * g) as f32;
            }
        }
    }
}

/// Mini-batch SGD on cross-entropy. Returns the network and the training
/// loss measured after each epoch.
pub fn train_mlp_with_losses(
    data: &Dataset,
    hidden_dims: &[usize],
    config: &TrainConfig,
) -> Result<(NetworkSpec, Vec<f64>)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::DegenerateData("dataset is empty".into()));
    }
    let mut present = vec![false; data.n_classes];
    data.labels.iter().for_each(|&l| present[l] = true);
    if let Some(c) = present.iter().position(|p| !p) {
        return Err(Error::DegenerateData(format!("class {c} has no samples")));
    }
    if hidden_dims.contains(&0) {
        return Err(Error::InvalidConfig("hidden layer width must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = init_network(data.n_features(), hidden_dims, data.n_classes, &mut rng);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros(&net);
            for &i in batch {
                grads.accumulate(&net, &data.features[i], data.labels[i]);
            }
            grads.apply(&mut net, config.learning_rate / batch.len() as f64);
        }
        losses.push(cross_entropy(&net, data)?);
    }
    Ok((net, losses))
}

pub fn train_mlp(data: &Dataset, hidden_dims: &[usize], config: &TrainConfig) -> Result<NetworkSpec> {
    train_mlp_with_losses(data, hidden_dims, config).map(|(net, _)| net)
}

/// Mean of class `c`: `3 * (1 + c / n_features)` at feature `c % n_features`,
/// zero elsewhere.
pub fn blob_mean(class: usize, n_features: usize) -> Vec<f32> {
    let mut m = vec![0.0f32; n_features];
    m[class % n_features] = 3.0 * (1 + class / n_features) as f32;
    m
}

/// Isotropic Gaussian blobs, one per class, with standard deviation
/// `spread`. Rows are grouped by class; train rows are drawn before test
/// rows from a single seeded generator.
pub fn gen_synthetic(
    n_classes: usize,
    n_features: usize,
    n_per_class_train: usize,
    n_per_class_test: usize,
    spread: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if n_classes == 0 || n_features == 0 || n_per_class_train == 0 || n_per_class_test == 0 {
        return Err(Error::InvalidConfig("all counts must be at least 1".into()));
    }
    let noise = Normal::new(0.0f64, spread)
        .map_err(|_| Error::InvalidConfig(format!("invalid spread {spread}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |per_class: usize| {
        let mut features = Vec::with_capacity(n_classes * per_class);
        let mut labels = Vec::with_capacity(n_classes * per_class);
        for c in 0..n_classes {
            let mean = blob_mean(c, n_features);
            for _ in 0..per_class {
                let row = mean
                    .iter()
                    .map(|&m| {
                        if spread == 0.0 {
                            m
                        } else {
                            (m as f64 + noise.sample(&mut rng)) as f32
                        }
                    })
                    .collect();
                features.push(row);
                labels.push(c);
            }
        }
        Dataset::new(features, labels, n_classes)
    };
    let train = draw(n_per_class_train)?;
    let test = draw(n_per_class_test)?;
    Ok((train, test))
}
