//! Per-comment text embeddings.
//!
//! The default [`HashedEncoder`] is a signed feature-hashing bag of tokens.
//! Models only see a [`NodeFeatureMatrix`], so any other [`TextEncoder`]
//! can be dropped in without touching them.

use serde::{Deserialize, Serialize};

use crate::discussion::DiscussionGraph;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const MAX_ENCODER_DIM: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub dim: usize,
    pub hash_seed: u64,
    pub normalize: bool,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            hash_seed: 7,
            normalize: true,
        }
    }
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.dim > MAX_ENCODER_DIM {
            return Err(Error::InvalidConfig(format!(
                "encoder dim {} outside 2..={MAX_ENCODER_DIM}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// One embedding row per node, in graph node order.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatureMatrix(pub Matrix);

impl NodeFeatureMatrix {
    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

pub trait TextEncoder {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HashedEncoder {
    spec: EncoderSpec,
}

impl HashedEncoder {
    pub fn new(spec: EncoderSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> EncoderSpec {
        self.spec
    }
}

impl TextEncoder for HashedEncoder {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn encode(&self, text: &str) -> Vec<f64> {
        encode(text, &self.spec)
    }
}

/// Lowercase and split on every run of characters that are neither
/// alphanumeric nor `*`. Asterisks stay inside tokens so censored words
/// such as `f*ck` remain single tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '*'))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Bucket index and sign for one token.
pub fn token_bucket(token: &str, spec: &EncoderSpec) -> (usize, f64) {
    let h = token_hash(token, spec.hash_seed);
    let index = (h % spec.dim as u64) as usize;
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    (index, sign)
}

fn token_hash(token: &str, seed: u64) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // splitmix64 finalizer
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Signed feature-hashing embedding of `text`.
pub fn encode(text: &str, spec: &EncoderSpec) -> Vec<f64> {
    let mut v = vec![0.0; spec.dim];
    for token in tokenize(text) {
        let (i, s) = token_bucket(&token, spec);
        v[i] += s;
    }
    if spec.normalize {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
    }
    v
}

pub fn encode_graph_with(g: &DiscussionGraph, encoder: &impl TextEncoder) -> NodeFeatureMatrix {
    let rows: Vec<Vec<f64>> = g.comments().iter().map(|c| encoder.encode(&c.text)).collect();
    if rows.is_empty() {
        return NodeFeatureMatrix(Matrix::zeros(0, encoder.dim()));
    }
    NodeFeatureMatrix(Matrix::from_rows(&rows))
}

pub fn encode_graph(g: &DiscussionGraph, spec: &EncoderSpec) -> NodeFeatureMatrix {
    let mut m = Matrix::zeros(g.len(), spec.dim);
    for (i, c) in g.comments().iter().enumerate() {
        m.row_mut(i).copy_from_slice(&encode(&c.text, spec));
    }
    NodeFeatureMatrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Feminism is cancerous anyways"),
            ["feminism", "is", "cancerous", "anyways"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("b*tch!!"), ["b*tch"]);
        assert_eq!(tokenize("*SPOILERS* Always"), ["*spoilers*", "always"]);
        assert_eq!(tokenize("topic_c"), ["topic", "c"]);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v = encode("", &EncoderSpec::default());
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn spec_bounds() {
        for dim in [0, 1, MAX_ENCODER_DIM + 1] {
            let spec = EncoderSpec { dim, ..Default::default() };
            assert!(HashedEncoder::new(spec).is_err());
        }
        assert!(HashedEncoder::new(EncoderSpec { dim: MAX_ENCODER_DIM, ..Default::default() }).is_ok());
    }

    #[test]
    fn trait_and_free_function_agree() {
        let spec = EncoderSpec { dim: 16, hash_seed: 3, normalize: false };
        let enc = HashedEncoder::new(spec).unwrap();
        assert_eq!(enc.encode("a b a"), encode("a b a", &spec));
    }
}
