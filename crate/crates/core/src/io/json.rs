//! JSON documents for PAD models and network weights.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{FormatError, FormatResult};
use crate::activation_model::PadModel;
use crate::nnet::{Activation, DenseLayer, NetworkSpec};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PadModelDocument {
    pub version: u64,
    pub layer: String,
    pub n_classes: usize,
    pub n_units: usize,
    pub sigma_floor: f64,
    pub kl_epsilon: f64,
    pub counts: Vec<u64>,
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
}

impl From<&PadModel> for PadModelDocument {
    fn from(m: &PadModel) -> Self {
        Self {
            version: FORMAT_VERSION,
            layer: m.layer_name().to_string(),
            n_classes: m.n_classes(),
            n_units: m.n_units(),
            sigma_floor: m.sigma_floor(),
            kl_epsilon: m.kl_epsilon(),
            counts: m.counts().to_vec(),
            means: m.means().to_vec(),
            stds: m.stds().to_vec(),
        }
    }
}

impl TryFrom<PadModelDocument> for PadModel {
    type Error = FormatError;

    fn try_from(d: PadModelDocument) -> FormatResult<Self> {
        PadModel::from_parts(
            d.layer,
            d.n_units,
            d.n_classes,
            d.counts,
            d.means,
            d.stds,
            d.sigma_floor,
            d.kl_epsilon,
        )
        .map_err(|e| FormatError::SchemaError(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDocument {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub activation: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<Vec<f32>>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDocument {
    pub version: u64,
    pub layers: Vec<LayerDocument>,
}

impl From<&NetworkSpec> for WeightsDocument {
    fn from(net: &NetworkSpec) -> Self {
        Self {
            version: FORMAT_VERSION,
            layers: net
                .layers()
                .iter()
                .map(|l| LayerDocument {
                    name: l.name.clone(),
                    kind: "dense".into(),
                    activation: l.activation.name().into(),
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: l.weights.chunks(l.in_dim.max(1)).map(<[f32]>::to_vec).collect(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<WeightsDocument> for NetworkSpec {
    type Error = FormatError;

    fn try_from(d: WeightsDocument) -> FormatResult<Self> {
        let mut layers = Vec::with_capacity(d.layers.len());
        for l in d.layers {
            if l.kind != "dense" {
                return Err(FormatError::SchemaError(format!(
                    "layer {:?} has unsupported type {:?}",
                    l.name, l.kind
                )));
            }
            let activation = Activation::from_name(&l.activation).ok_or_else(|| {
                FormatError::SchemaError(format!("unknown activation {:?}", l.activation))
            })?;
            if l.weights.len() != l.out_dim || l.weights.iter().any(|row| row.len() != l.in_dim) {
                return Err(FormatError::SchemaError(format!(
                    "layer {:?} weights are not {}x{}",
                    l.name, l.out_dim, l.in_dim
                )));
            }
            layers.push(DenseLayer {
                name: l.name,
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                weights: l.weights.into_iter().flatten().collect(),
                bias: l.bias,
                activation,
            });
        }
        NetworkSpec::new(layers).map_err(|e| FormatError::SchemaError(e.to_string()))
    }
}

/// Parses JSON, checks the `version` field, then decodes the full schema.
fn read_versioned<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> FormatResult<T> {
    let value: Value = serde_json::from_reader(r)
        .map_err(|e| FormatError::SchemaError(format!("invalid JSON: {e}")))?;
    let version = value
        .get("version")
        .ok_or_else(|| FormatError::SchemaError("missing version".into()))?
        .as_u64()
        .ok_or_else(|| FormatError::SchemaError("version must be an unsigned integer".into()))?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    serde_json::from_value(value).map_err(|e| FormatError::SchemaError(e.to_string()))
}

fn write_pretty<W: Write, T: Serialize>(mut w: W, doc: &T) -> FormatResult<()> {
    serde_json::to_writer_pretty(&mut w, doc).map_err(|e| FormatError::SchemaError(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_pad_model<R: Read>(r: R) -> FormatResult<PadModel> {
    read_versioned::<_, PadModelDocument>(r)?.try_into()
}

pub fn write_pad_model<W: Write>(w: W, model: &PadModel) -> FormatResult<()> {
    write_pretty(w, &PadModelDocument::from(model))
}

pub fn read_weights<R: Read>(r: R) -> FormatResult<NetworkSpec> {
    read_versioned::<_, WeightsDocument>(r)?.try_into()
}

pub fn write_weights<W: Write>(w: W, net: &NetworkSpec) -> FormatResult<()> {
    write_pretty(w, &WeightsDocument::from(net))
}
