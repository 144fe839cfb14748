//! Graph transformer over discussion trees.
//!
//! Every node attends to every other node. Structure enters in two places:
//!
//! - a learned scalar bias per (head, clamped tree distance) is added to the
//!   attention logits (spatial encoding);
//! - learned in-degree and out-degree embeddings are added to the projected
//!   input features (centrality encoding).
//!
//! Blocks are pre-normalized: `h += attn(ln1(h))`, then `h += ffn(ln2(h))`.
//! A linear readout maps the final states to five ordinal logits per node.

use std::collections::VecDeque;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::discussion::{Degree, DiscussionGraph};
use crate::error::{Error, Result};
use crate::params::{BoundParams, Init, ParamSet, ParamSpec, UNIT_NORM_FAN_IN};
use crate::prediction::{OrdinalPrediction, NUM_CLASSES};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphormerConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub model_dim: usize,
    pub ffn_dim: usize,
    pub max_distance: usize,
    pub max_degree: usize,
    pub input_dim: usize,
}

impl Default for GraphormerConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            num_heads: 4,
            model_dim: 32,
            ffn_dim: 64,
            max_distance: 8,
            max_degree: 16,
            input_dim: 64,
        }
    }
}

impl GraphormerConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("model_dim", self.model_dim),
            ("ffn_dim", self.ffn_dim),
            ("max_distance", self.max_distance),
            ("max_degree", self.max_degree),
            ("input_dim", self.input_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.model_dim % self.num_heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "model_dim {} not divisible by num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let d = self.model_dim;
        let f = self.ffn_dim;
        let mut specs = vec![
            ParamSpec::new("input.weight", self.input_dim, d, Init::Uniform { fan_in: UNIT_NORM_FAN_IN }),
            ParamSpec::new("input.bias", 1, d, Init::Zeros),
            ParamSpec::new("centrality.in", self.max_degree + 1, d, Init::Uniform { fan_in: d }),
            ParamSpec::new("centrality.out", self.max_degree + 1, d, Init::Uniform { fan_in: d }),
            ParamSpec::new("spatial.bias", self.num_heads, self.max_distance + 1, Init::Zeros),
            ParamSpec::new("readout.weight", d, NUM_CLASSES, Init::Uniform { fan_in: d }),
            ParamSpec::new("readout.bias", 1, NUM_CLASSES, Init::Zeros),
        ];
        for l in 0..self.num_layers {
            let p = |s: &str| format!("layer{l}.{s}");
            specs.extend([
                ParamSpec::new(p("ln1.gain"), 1, d, Init::Ones),
                ParamSpec::new(p("ln1.offset"), 1, d, Init::Zeros),
                ParamSpec::new(p("attn.query"), d, d, Init::Uniform { fan_in: d }),
                ParamSpec::new(p("attn.key"), d, d, Init::Uniform { fan_in: d }),
                ParamSpec::new(p("attn.value"), d, d, Init::Uniform { fan_in: d }),
                ParamSpec::new(p("attn.output"), d, d, Init::Uniform { fan_in: d }),
                ParamSpec::new(p("attn.output_bias"), 1, d, Init::Zeros),
                ParamSpec::new(p("ln2.gain"), 1, d, Init::Ones),
                ParamSpec::new(p("ln2.offset"), 1, d, Init::Zeros),
                ParamSpec::new(p("ffn.w1"), d, f, Init::Uniform { fan_in: d }),
                ParamSpec::new(p("ffn.b1"), 1, f, Init::Zeros),
                ParamSpec::new(p("ffn.w2"), f, d, Init::Uniform { fan_in: f }),
                ParamSpec::new(p("ffn.b2"), 1, d, Init::Zeros),
            ]);
        }
        specs
    }
}

/// Pairwise tree distances, clamped at `max_distance`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<usize>,
}

impl DistanceMatrix {
    pub fn from_raw(n: usize, data: Vec<usize>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[usize] {
        &self.data
    }

    pub fn clamped(&self, max_distance: usize) -> Rc<[usize]> {
        self.data.iter().map(|&d| d.min(max_distance)).collect()
    }

    /// Reorders rows and columns: entry `(i, j)` of the result is entry
    /// `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut data = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, data }
    }
}

/// Breadth-first search from every node over the undirected reply edges.
pub fn build_distance_matrix(g: &DiscussionGraph, max_distance: usize) -> DistanceMatrix {
    let n = g.len();
    let mut data = vec![0; n * n];
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.fill(usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for v in g.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (t, &d) in dist.iter().enumerate() {
            data[s * n + t] = d.min(max_distance);
        }
    }
    DistanceMatrix { n, data }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graphormer {
    config: GraphormerConfig,
    params: ParamSet,
}

/// Tape handles from one forward pass.
pub struct GraphormerTrace {
    pub logits: Var,
    /// One `n x n` attention matrix per (layer, head), layer-major.
    pub attention: Vec<Var>,
}

impl Graphormer {
    pub fn new(config: GraphormerConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config.param_specs())?;
        Ok(Self { config, params })
    }

    pub fn init(config: GraphormerConfig, init_scale: f64, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let params = ParamSet::from_specs(&config.param_specs(), init_scale, rng);
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &GraphormerConfig {
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

    fn check_inputs(&self, features: &Matrix, distances: &DistanceMatrix, degrees: &[Degree]) -> Result<()> {
        let n = features.rows();
        if features.cols() != self.config.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "feature width {} vs input_dim {}",
                features.cols(),
                self.config.input_dim
            )));
        }
        if distances.len() != n || degrees.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} feature rows, {} distance rows, {} degrees",
                distances.len(),
                degrees.len()
            )));
        }
        self.params.check_finite()
    }

    /// Records the forward pass on `tape` using parameters bound there.
    pub fn trace(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        features: &Matrix,
        distances: &DistanceMatrix,
        degrees: &[Degree],
    ) -> Result<GraphormerTrace> {
        self.check_inputs(features, distances, degrees)?;
        let cfg = &self.config;
        let n = features.rows();
        let hd = cfg.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let dist_index = distances.clamped(cfg.max_distance);

        let x = tape.leaf(features.clone());
        let mut h = tape.matmul(x, p.var("input.weight"));
        h = tape.add_row(h, p.var("input.bias"));
        let in_idx = degrees.iter().map(|d| d.in_degree.min(cfg.max_degree)).collect();
        let out_idx = degrees.iter().map(|d| d.out_degree.min(cfg.max_degree)).collect();
        let c_in = tape.gather_rows(p.var("centrality.in"), in_idx);
        let c_out = tape.gather_rows(p.var("centrality.out"), out_idx);
        h = tape.add(h, c_in);
        h = tape.add(h, c_out);

        let mut attention = Vec::with_capacity(cfg.num_layers * cfg.num_heads);
        for l in 0..cfg.num_layers {
            let name = |s: &str| format!("layer{l}.{s}");
            let a = tape.layer_norm(h);
            let a = tape.mul_row(a, p.var(&name("ln1.gain")));
            let a = tape.add_row(a, p.var(&name("ln1.offset")));
            let q = tape.matmul(a, p.var(&name("attn.query")));
            let k = tape.matmul(a, p.var(&name("attn.key")));
            let v = tape.matmul(a, p.var(&name("attn.value")));
            let mut heads = Vec::with_capacity(cfg.num_heads);
            for head in 0..cfg.num_heads {
                let qh = tape.col_slice(q, head * hd, hd);
                let kh = tape.col_slice(k, head * hd, hd);
                let vh = tape.col_slice(v, head * hd, hd);
                let scores = tape.matmul_t(qh, kh);
                let scores = tape.scale(scores, scale);
                let bias = tape.gather_table(p.var("spatial.bias"), head, dist_index.clone(), n);
                let scores = tape.add(scores, bias);
                let att = tape.softmax_rows(scores);
                attention.push(att);
                heads.push(tape.matmul(att, vh));
            }
            let cat = tape.concat_cols(&heads);
            let o = tape.matmul(cat, p.var(&name("attn.output")));
            let o = tape.add_row(o, p.var(&name("attn.output_bias")));
            h = tape.add(h, o);

            let b = tape.layer_norm(h);
            let b = tape.mul_row(b, p.var(&name("ln2.gain")));
            let b = tape.add_row(b, p.var(&name("ln2.offset")));
            let f = tape.matmul(b, p.var(&name("ffn.w1")));
            let f = tape.add_row(f, p.var(&name("ffn.b1")));
            let f = tape.gelu(f);
            let f = tape.matmul(f, p.var(&name("ffn.w2")));
            let f = tape.add_row(f, p.var(&name("ffn.b2")));
            h = tape.add(h, f);
        }

        let logits = tape.matmul(h, p.var("readout.weight"));
        let logits = tape.add_row(logits, p.var("readout.bias"));
        Ok(GraphormerTrace { logits, attention })
    }

    pub fn forward_logits(&self, features: &Matrix, distances: &DistanceMatrix, degrees: &[Degree]) -> Result<Matrix> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let trace = self.trace(&mut tape, &p, features, distances, degrees)?;
        Ok(tape.value(trace.logits).clone())
    }

    pub fn forward(
        &self,
        features: &Matrix,
        distances: &DistanceMatrix,
        degrees: &[Degree],
    ) -> Result<Vec<OrdinalPrediction>> {
        OrdinalPrediction::from_logit_matrix(&self.forward_logits(features, distances, degrees)?)
    }

    /// Attention matrices per (layer, head), layer-major.
    pub fn attention_maps(&self, features: &Matrix, distances: &DistanceMatrix, degrees: &[Degree]) -> Result<Vec<Matrix>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let trace = self.trace(&mut tape, &p, features, distances, degrees)?;
        Ok(trace.attention.iter().map(|&a| tape.value(a).clone()).collect())
    }
}
