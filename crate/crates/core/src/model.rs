//! One interface over the three node-model kinds.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid_scalar, Tape, Var};
use crate::comment_only::{map_to_bins, CommentOnly, CommentOnlyConfig};
use crate::discussion::{Degree, DiscussionGraph};
use crate::encoder::{encode_graph, EncoderSpec};
use crate::error::{Error, Result};
use crate::gat::{neighbor_lists, Gat, GatConfig};
use crate::graphormer::{build_distance_matrix, DistanceMatrix, Graphormer, GraphormerConfig};
use crate::params::{BoundParams, ParamSet, ParamSpec};
use crate::prediction::{OrdinalPrediction, NUM_CLASSES};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Graphormer,
    Gat,
    CommentOnly,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Graphormer, ModelKind::Gat, ModelKind::CommentOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Graphormer => "graphormer",
            ModelKind::Gat => "gat",
            ModelKind::CommentOnly => "comment_only",
        }
    }

    /// Column heading used in rendered reports.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Graphormer => "Graphormer",
            ModelKind::Gat => "GAT",
            ModelKind::CommentOnly => "Comment-only",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphormer" => Ok(ModelKind::Graphormer),
            "gat" => Ok(ModelKind::Gat),
            "comment_only" | "comment-only" => Ok(ModelKind::CommentOnly),
            other => Err(Error::InvalidConfig(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Ce,
    OrdinalWeighted,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::OrdinalWeighted => "ordinal_weighted",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" => Ok(LossKind::Ce),
            "ordinal_weighted" => Ok(LossKind::OrdinalWeighted),
            other => Err(Error::InvalidConfig(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelConfig {
    Graphormer(GraphormerConfig),
    Gat(GatConfig),
    CommentOnly(CommentOnlyConfig),
}

impl ModelConfig {
    /// Default configuration of `kind` for features of width `input_dim`.
    pub fn default_for(kind: ModelKind, input_dim: usize) -> Self {
        match kind {
            ModelKind::Graphormer => ModelConfig::Graphormer(GraphormerConfig {
                input_dim,
                ..Default::default()
            }),
            ModelKind::Gat => ModelConfig::Gat(GatConfig {
                input_dim,
                ..Default::default()
            }),
            ModelKind::CommentOnly => ModelConfig::CommentOnly(CommentOnlyConfig {
                input_dim,
                ..Default::default()
            }),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Graphormer(_) => ModelKind::Graphormer,
            ModelConfig::Gat(_) => ModelKind::Gat,
            ModelConfig::CommentOnly(_) => ModelKind::CommentOnly,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ModelConfig::Graphormer(c) => c.input_dim,
            ModelConfig::Gat(c) => c.input_dim,
            ModelConfig::CommentOnly(c) => c.input_dim,
        }
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        match self {
            ModelConfig::Graphormer(c) => c.param_specs(),
            ModelConfig::Gat(c) => c.param_specs(),
            ModelConfig::CommentOnly(c) => c.param_specs(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ModelConfig::Graphormer(c) => serde_json::to_value(c),
            ModelConfig::Gat(c) => serde_json::to_value(c),
            ModelConfig::CommentOnly(c) => serde_json::to_value(c),
        }
        .expect("config serializes")
    }

    pub fn from_json(kind: ModelKind, value: serde_json::Value) -> Result<Self> {
        Ok(match kind {
            ModelKind::Graphormer => ModelConfig::Graphormer(serde_json::from_value(value)?),
            ModelKind::Gat => ModelConfig::Gat(serde_json::from_value(value)?),
            ModelKind::CommentOnly => ModelConfig::CommentOnly(serde_json::from_value(value)?),
        })
    }
}

/// Everything a model needs from one graph, computed once.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub features: Matrix,
    /// Unclamped; each model clamps to its own table size.
    pub distances: DistanceMatrix,
    pub degrees: Vec<Degree>,
    pub neighbors: Rc<[Vec<usize>]>,
}

impl GraphInput {
    pub fn new(g: &DiscussionGraph, encoder: &EncoderSpec) -> Self {
        Self::with_features(g, encode_graph(g, encoder).0)
    }

    pub fn with_features(g: &DiscussionGraph, features: Matrix) -> Self {
        assert_eq!(features.rows(), g.len(), "one feature row per node");
        Self {
            features,
            distances: build_distance_matrix(g, usize::MAX),
            degrees: g.degrees(),
            neighbors: neighbor_lists(g),
        }
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }
}

/// A node's output in the shared 0-4 label space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePrediction {
    pub label: u8,
    /// Softmax of the logits for graph models; one-hot on the bin for the
    /// comment-only scorer.
    pub probabilities: [f64; NUM_CLASSES],
    /// Raw (0, 1) score, comment-only scorer only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl From<OrdinalPrediction> for NodePrediction {
    fn from(p: OrdinalPrediction) -> Self {
        Self {
            label: p.label,
            probabilities: p.probabilities,
            score: None,
        }
    }
}

impl NodePrediction {
    pub fn from_score(score: f64) -> Result<Self> {
        let label = map_to_bins(score)?;
        let mut probabilities = [0.0; NUM_CLASSES];
        probabilities[label as usize] = 1.0;
        Ok(Self {
            label,
            probabilities,
            score: Some(score),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Graphormer(Graphormer),
    Gat(Gat),
    CommentOnly(CommentOnly),
}

impl Model {
    pub fn init(config: &ModelConfig, init_scale: f64, rng: &mut impl Rng) -> Result<Self> {
        Ok(match config {
            ModelConfig::Graphormer(c) => Model::Graphormer(Graphormer::init(*c, init_scale, rng)?),
            ModelConfig::Gat(c) => Model::Gat(Gat::init(*c, init_scale, rng)?),
            ModelConfig::CommentOnly(c) => Model::CommentOnly(CommentOnly::init(*c, init_scale, rng)?),
        })
    }

    pub fn from_parts(config: &ModelConfig, params: ParamSet) -> Result<Self> {
        Ok(match config {
            ModelConfig::Graphormer(c) => Model::Graphormer(Graphormer::new(*c, params)?),
            ModelConfig::Gat(c) => Model::Gat(Gat::new(*c, params)?),
            ModelConfig::CommentOnly(c) => Model::CommentOnly(CommentOnly::new(*c, params)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.config().kind()
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Model::Graphormer(m) => ModelConfig::Graphormer(*m.config()),
            Model::Gat(m) => ModelConfig::Gat(*m.config()),
            Model::CommentOnly(m) => ModelConfig::CommentOnly(*m.config()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.config().input_dim()
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            Model::Graphormer(m) => m.params(),
            Model::Gat(m) => m.params(),
            Model::CommentOnly(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Model::Graphormer(m) => m.params_mut(),
            Model::Gat(m) => m.params_mut(),
            Model::CommentOnly(m) => m.params_mut(),
        }
    }

    /// Output before the label mapping: `n x 5` logits for the graph models,
    /// `n x 1` pre-sigmoid scores for the comment-only scorer.
    pub fn trace(&self, tape: &mut Tape, p: &BoundParams, input: &GraphInput) -> Result<Var> {
        match self {
            Model::Graphormer(m) => Ok(m
                .trace(tape, p, &input.features, &input.distances, &input.degrees)?
                .logits),
            Model::Gat(m) => Ok(m.trace(tape, p, &input.features, &input.neighbors)?.logits),
            Model::CommentOnly(m) => m.trace(tape, p, &input.features),
        }
    }

    /// Records output and loss; returns the scalar loss node.
    pub fn trace_loss(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        input: &GraphInput,
        labels: &[Option<u8>],
        loss: LossKind,
    ) -> Result<Var> {
        validate_labels(labels, input.len())?;
        let out = self.trace(tape, p, input)?;
        Ok(match (self, loss) {
            (Model::CommentOnly(_), LossKind::Ce) => tape.soft_binary_ce(out, labels),
            (Model::CommentOnly(_), LossKind::OrdinalWeighted) => tape.squared_ordinal(out, labels),
            (_, LossKind::Ce) => tape.cross_entropy(out, labels),
            (_, LossKind::OrdinalWeighted) => tape.expected_distance(out, labels),
        })
    }

    pub fn predict(&self, input: &GraphInput) -> Result<Vec<NodePrediction>> {
        let mut tape = Tape::new();
        let p = self.params().bind(&mut tape);
        let out = self.trace(&mut tape, &p, input)?;
        let out = tape.value(out);
        match self {
            Model::CommentOnly(_) => out
                .data()
                .iter()
                .map(|&z| NodePrediction::from_score(sigmoid_scalar(z)))
                .collect(),
            _ => Ok(OrdinalPrediction::from_logit_matrix(out)?
                .into_iter()
                .map(NodePrediction::from)
                .collect()),
        }
    }

    pub fn predict_graph(&self, g: &DiscussionGraph, encoder: &EncoderSpec) -> Result<Vec<NodePrediction>> {
        self.predict(&GraphInput::new(g, encoder))
    }
}

pub(crate) fn validate_labels(labels: &[Option<u8>], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {n} nodes", labels.len())));
    }
    for l in labels.iter().flatten() {
        if *l as usize >= NUM_CLASSES {
            return Err(Error::LabelOutOfRange {
                id: String::from("<label>"),
                label: i64::from(*l),
            });
        }
    }
    if labels.iter().all(Option::is_none) {
        return Err(Error::NoLabels);
    }
    Ok(())
}
