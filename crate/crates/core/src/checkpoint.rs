//! Model checkpoints as JSON.
//!
//! ```text
//! { "format_version": 1,
//!   "model_kind": "graphormer" | "gat" | "comment_only",
//!   "encoder_spec": { "dim", "hash_seed", "normalize" },
//!   "config": { ...model config... },
//!   "tensors": { name: { "shape": [rows, cols], "data": [row-major f64] } } }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderSpec;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelKind};
use crate::params::ParamSet;
use crate::tensor::Matrix;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u64,
    pub model_kind: ModelKind,
    pub encoder_spec: EncoderSpec,
    pub config: serde_json::Value,
    pub tensors: BTreeMap<String, TensorRecord>,
}

/// A model together with the encoder its input width was built for.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub encoder: EncoderSpec,
}

impl TrainedModel {
    pub fn new(model: Model, encoder: EncoderSpec) -> Result<Self> {
        encoder.validate()?;
        if encoder.dim != model.input_dim() {
            return Err(Error::EncoderMismatch {
                encoder: encoder.dim,
                model: model.input_dim(),
            });
        }
        Ok(Self { model, encoder })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            model_kind: self.model.kind(),
            encoder_spec: self.encoder,
            config: self.model.config().to_json(),
            tensors: self
                .model
                .params()
                .iter()
                .map(|(name, m)| {
                    (
                        name.clone(),
                        TensorRecord {
                            shape: vec![m.rows(), m.cols()],
                            data: m.data().to_vec(),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        Self::from_checkpoint(ckpt)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion(ckpt.format_version));
        }
        let config = ModelConfig::from_json(ckpt.model_kind, ckpt.config)?;
        if ckpt.encoder_spec.dim != config.input_dim() {
            return Err(Error::EncoderMismatch {
                encoder: ckpt.encoder_spec.dim,
                model: config.input_dim(),
            });
        }
        let mut params = ParamSet::new();
        for (name, rec) in ckpt.tensors {
            let (rows, cols) = match rec.shape.as_slice() {
                [r, c] => (*r, *c),
                [n] => (1, *n),
                other => {
                    return Err(Error::DimensionMismatch(format!("tensor {name} has shape {other:?}")));
                }
            };
            if rec.data.len() != rows * cols {
                return Err(Error::DimensionMismatch(format!(
                    "tensor {name}: shape {:?} but {} values",
                    rec.shape,
                    rec.data.len()
                )));
            }
            params.insert(name, Matrix::from_vec(rows, cols, rec.data));
        }
        params.check_finite()?;
        let model = Model::from_parts(&config, params)?;
        Self::new(model, ckpt.encoder_spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
