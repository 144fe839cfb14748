//! Neighbor-masked graph attention baseline.
//!
//! Each node attends only to itself, its parent and its replies. After `L`
//! layers a node's output depends on nodes at most `L` reply edges away and
//! on nothing else.

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::discussion::DiscussionGraph;
use crate::error::{Error, Result};
use crate::params::{BoundParams, Init, ParamSet, ParamSpec, UNIT_NORM_FAN_IN};
use crate::prediction::{OrdinalPrediction, NUM_CLASSES};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub model_dim: usize,
    pub input_dim: usize,
    #[serde(default = "default_slope")]
    pub negative_slope: f64,
}

fn default_slope() -> f64 {
    0.2
}

impl Default for GatConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            num_heads: 4,
            model_dim: 32,
            input_dim: 64,
            negative_slope: default_slope(),
        }
    }
}

impl GatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.num_heads == 0 || self.model_dim == 0 || self.input_dim == 0 {
            return Err(Error::InvalidConfig("gat dimensions must be positive".into()));
        }
        if self.model_dim % self.num_heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "model_dim {} not divisible by num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        if !(self.negative_slope.is_finite() && self.negative_slope >= 0.0) {
            return Err(Error::InvalidConfig("negative_slope must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let d = self.model_dim;
        let hd = self.head_dim();
        let mut specs = vec![
            ParamSpec::new("input.weight", self.input_dim, d, Init::Uniform { fan_in: UNIT_NORM_FAN_IN }),
            ParamSpec::new("input.bias", 1, d, Init::Zeros),
            ParamSpec::new("readout.weight", d, NUM_CLASSES, Init::Uniform { fan_in: d }),
            ParamSpec::new("readout.bias", 1, NUM_CLASSES, Init::Zeros),
        ];
        for l in 0..self.num_layers {
            for k in 0..self.num_heads {
                let p = |s: &str| format!("layer{l}.head{k}.{s}");
                specs.extend([
                    ParamSpec::new(p("weight"), d, hd, Init::Uniform { fan_in: d }),
                    ParamSpec::new(p("att_src"), hd, 1, Init::Uniform { fan_in: hd }),
                    ParamSpec::new(p("att_dst"), hd, 1, Init::Uniform { fan_in: hd }),
                ]);
            }
        }
        specs
    }
}

/// `[i, parent(i), children(i)...]` for every node.
pub fn neighbor_lists(g: &DiscussionGraph) -> Rc<[Vec<usize>]> {
    (0..g.len())
        .map(|i| std::iter::once(i).chain(g.neighbors(i)).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gat {
    config: GatConfig,
    params: ParamSet,
}

pub struct GatTrace {
    pub logits: Var,
    /// One neighbor-attention node per (layer, head), layer-major.
    pub attention: Vec<Var>,
}

impl Gat {
    pub fn new(config: GatConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config.param_specs())?;
        Ok(Self { config, params })
    }

    pub fn init(config: GatConfig, init_scale: f64, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let params = ParamSet::from_specs(&config.param_specs(), init_scale, rng);
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &GatConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    pub fn trace(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        features: &Matrix,
        neighbors: &Rc<[Vec<usize>]>,
    ) -> Result<GatTrace> {
        let cfg = &self.config;
        if features.cols() != cfg.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "feature width {} vs input_dim {}",
                features.cols(),
                cfg.input_dim
            )));
        }
        if neighbors.len() != features.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows, {} neighbor lists",
                features.rows(),
                neighbors.len()
            )));
        }
        self.params.check_finite()?;

        let x = tape.leaf(features.clone());
        let mut h = tape.matmul(x, p.var("input.weight"));
        h = tape.add_row(h, p.var("input.bias"));
        let mut attention = Vec::with_capacity(cfg.num_layers * cfg.num_heads);
        for l in 0..cfg.num_layers {
            let mut heads = Vec::with_capacity(cfg.num_heads);
            for k in 0..cfg.num_heads {
                let name = |s: &str| format!("layer{l}.head{k}.{s}");
                let wh = tape.matmul(h, p.var(&name("weight")));
                let src = tape.matmul(wh, p.var(&name("att_src")));
                let dst = tape.matmul(wh, p.var(&name("att_dst")));
                let out = tape.neighbor_attention(src, dst, wh, neighbors.clone(), cfg.negative_slope);
                attention.push(out);
                heads.push(out);
            }
            let cat = tape.concat_cols(&heads);
            let act = tape.elu(cat);
            h = tape.add(h, act);
        }
        let logits = tape.matmul(h, p.var("readout.weight"));
        let logits = tape.add_row(logits, p.var("readout.bias"));
        Ok(GatTrace { logits, attention })
    }

    pub fn forward_logits(&self, features: &Matrix, g: &DiscussionGraph) -> Result<Matrix> {
        self.forward_logits_with(features, &neighbor_lists(g))
    }

    pub fn forward_logits_with(&self, features: &Matrix, neighbors: &Rc<[Vec<usize>]>) -> Result<Matrix> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let trace = self.trace(&mut tape, &p, features, neighbors)?;
        Ok(tape.value(trace.logits).clone())
    }

    pub fn forward(&self, features: &Matrix, g: &DiscussionGraph) -> Result<Vec<OrdinalPrediction>> {
        OrdinalPrediction::from_logit_matrix(&self.forward_logits(features, g)?)
    }

    /// Dense `n x n` attention weights per (layer, head); zero outside each
    /// node's neighbor list.
    pub fn attention_maps(&self, features: &Matrix, g: &DiscussionGraph) -> Result<Vec<Matrix>> {
        let neighbors = neighbor_lists(g);
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let trace = self.trace(&mut tape, &p, features, &neighbors)?;
        let n = g.len();
        Ok(trace
            .attention
            .iter()
            .map(|&v| {
                let w = tape.attention_weights(v).expect("neighbor attention node");
                let mut m = Matrix::zeros(n, n);
                for (i, row) in w.iter().enumerate() {
                    for (&j, &a) in neighbors[i].iter().zip(row) {
                        m.set(i, j, a);
                    }
                }
                m
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discussion::Comment;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_node_attends_to_itself() {
        let g = DiscussionGraph::new(
            "one",
            None,
            vec![Comment {
                id: "r".into(),
                parent_id: None,
                text: String::new(),
                gold_label: None,
                author: None,
            }],
        )
        .unwrap();
        let cfg = GatConfig { input_dim: 3, model_dim: 4, num_heads: 2, num_layers: 2, ..Default::default() };
        let model = Gat::init(cfg, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let x = Matrix::from_rows(&[vec![0.5, -1.0, 2.0]]);
        for m in model.attention_maps(&x, &g).unwrap() {
            assert_eq!(m.get(0, 0), 1.0);
        }
    }

    #[test]
    fn validation() {
        assert!(GatConfig { model_dim: 6, num_heads: 4, ..Default::default() }.validate().is_err());
        assert!(GatConfig { negative_slope: f64::NAN, ..Default::default() }.validate().is_err());
    }
}
