//! Per-node ordinal outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{softmax, Matrix};

pub const NUM_CLASSES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrdinalPrediction {
    pub logits: [f64; NUM_CLASSES],
    pub probabilities: [f64; NUM_CLASSES],
    pub label: u8,
}

impl OrdinalPrediction {
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.len() != NUM_CLASSES {
            return Err(Error::DimensionMismatch(format!(
                "expected {NUM_CLASSES} logits, got {}",
                logits.len()
            )));
        }
        let label = argmax(logits)?;
        let mut l = [0.0; NUM_CLASSES];
        l.copy_from_slice(logits);
        let mut p = [0.0; NUM_CLASSES];
        p.copy_from_slice(&softmax(logits));
        Ok(Self {
            logits: l,
            probabilities: p,
            label,
        })
    }

    pub fn from_logit_matrix(m: &Matrix) -> Result<Vec<Self>> {
        (0..m.rows()).map(|i| Self::from_logits(m.row(i))).collect()
    }
}

/// Index of the largest logit; the lowest index wins ties.
pub fn argmax(logits: &[f64]) -> Result<u8> {
    let mut best = 0;
    for (i, &z) in logits.iter().enumerate() {
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("logit {i}")));
        }
        if z > logits[best] {
            best = i;
        }
    }
    Ok(best as u8)
}

/// Labels for a batch of logit rows.
pub fn predict(logits: &[[f64; NUM_CLASSES]]) -> Result<Vec<u8>> {
    logits.iter().map(|row| argmax(row)).collect()
}
