use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

use super::network::{Activation, Layer, LayerSpec, MlpNetwork};

pub const CHECKPOINT_FORMAT: &str = "sann-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk JSON form of a network. Weights are row-major `[output × input]`
/// and always stored as `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl<T: Real> MlpNetwork<T> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layers: self
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    input_width: l.spec.input_width,
                    output_width: l.spec.output_width,
                    activation: l.spec.activation,
                    dropout_rate: l.spec.dropout_rate,
                    weights: l.weights.as_slice().iter().map(|v| v.as_f64()).collect(),
                    bias: l.bias.iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        let layers = ckpt
            .layers
            .iter()
            .map(|r| {
                let spec = LayerSpec {
                    input_width: r.input_width,
                    output_width: r.output_width,
                    activation: r.activation,
                    dropout_rate: r.dropout_rate,
                };
                let w = Matrix::from_vec(
                    r.output_width,
                    r.input_width,
                    r.weights.iter().map(|&v| T::of(v)).collect(),
                )?;
                Layer::new(w, r.bias.iter().map(|&v| T::of(v)).collect(), spec)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_checkpoint(&serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
