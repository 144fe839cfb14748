//! Depth-wise replay of a thread and scoring of the resulting predictions.
//!
//! At horizon `d` the model sees only comments at depth `<= d`, encoded and
//! predicted as a standalone graph. Horizons run from 1 (the post and its
//! direct replies) to the thread's maximum depth, so every node collects one
//! prediction per horizon from the one at which it appears.

use serde::{Deserialize, Serialize};

use crate::checkpoint::TrainedModel;
use crate::discussion::DiscussionGraph;
use crate::encoder::EncoderSpec;
use crate::error::{Error, Result};
use crate::model::{GraphInput, ModelKind};
use crate::prediction::NUM_CLASSES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonPrediction {
    pub horizon: usize,
    pub label: u8,
    pub probabilities: [f64; NUM_CLASSES],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeTrajectory {
    pub node_id: String,
    pub depth: usize,
    /// Consecutive horizons, starting at `max(1, depth)`.
    pub steps: Vec<HorizonPrediction>,
}

impl NodeTrajectory {
    pub fn first(&self) -> &HorizonPrediction {
        &self.steps[0]
    }

    pub fn last(&self) -> &HorizonPrediction {
        self.steps.last().expect("trajectory is nonempty")
    }

    pub fn at(&self, horizon: usize) -> Option<&HorizonPrediction> {
        let start = self.steps.first()?.horizon;
        horizon.checked_sub(start).and_then(|k| self.steps.get(k))
    }
}

/// All node trajectories of one model over one graph, in graph node order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrajectory {
    pub graph_id: String,
    pub model_kind: ModelKind,
    pub horizons: usize,
    pub nodes: Vec<NodeTrajectory>,
}

impl PredictionTrajectory {
    /// Checks that `g` is the graph these trajectories were computed on.
    pub fn check_graph(&self, g: &DiscussionGraph) -> Result<()> {
        if self.graph_id != g.id() {
            return Err(Error::TrajectoryMismatch(format!(
                "trajectory for {} given graph {}",
                self.graph_id,
                g.id()
            )));
        }
        if self.nodes.len() != g.len() {
            return Err(Error::TrajectoryMismatch(format!(
                "{} trajectories for {} nodes",
                self.nodes.len(),
                g.len()
            )));
        }
        for (i, t) in self.nodes.iter().enumerate() {
            if t.node_id != g.comment(i).id {
                return Err(Error::TrajectoryMismatch(format!(
                    "node {i} is {} in the trajectory and {} in the graph",
                    t.node_id,
                    g.comment(i).id
                )));
            }
        }
        Ok(())
    }

    pub fn select(&self, node: usize, at: Horizon) -> Option<&HorizonPrediction> {
        let t = &self.nodes[node];
        match at {
            Horizon::Final => Some(t.last()),
            Horizon::Appearance => Some(t.first()),
            Horizon::At(d) => t.at(d),
        }
    }
}

/// Which prediction of a node's trajectory is scored or reported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// The last horizon, with the whole thread visible.
    #[default]
    Final,
    /// The horizon at which the node first appears.
    Appearance,
    /// A fixed horizon; nodes deeper than it are not scored.
    At(usize),
}

impl std::str::FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Horizon::Final),
            "appearance" => Ok(Horizon::Appearance),
            other => other
                .parse::<usize>()
                .ok()
                .filter(|&d| d >= 1)
                .map(Horizon::At)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown horizon {other:?}"))),
        }
    }
}

/// Number of horizons the replay of `g` runs.
pub fn horizon_count(g: &DiscussionGraph) -> usize {
    g.max_depth().max(1)
}

/// Replays `g` depth by depth with `model`.
///
/// Comment-only models score each comment once from its own text and repeat
/// that prediction at every horizon.
pub fn stream_predict(
    model: &TrainedModel,
    g: &DiscussionGraph,
    encoder: &EncoderSpec,
) -> Result<PredictionTrajectory> {
    if model.encoder != *encoder {
        return Err(Error::EncoderSpecMismatch {
            model: format!("{:?}", model.encoder),
            requested: format!("{encoder:?}"),
        });
    }
    let horizons = horizon_count(g);
    let mut nodes: Vec<NodeTrajectory> = (0..g.len())
        .map(|i| NodeTrajectory {
            node_id: g.comment(i).id.clone(),
            depth: g.depth(i),
            steps: Vec::new(),
        })
        .collect();

    if model.model.kind() == ModelKind::CommentOnly {
        let preds = model.model.predict(&GraphInput::new(g, encoder))?;
        for (t, p) in nodes.iter_mut().zip(preds) {
            t.steps = (t.depth.max(1)..=horizons)
                .map(|d| HorizonPrediction {
                    horizon: d,
                    label: p.label,
                    probabilities: p.probabilities,
                })
                .collect();
        }
    } else {
        for d in 1..=horizons {
            let snap = g.snapshot_at_depth(d);
            let preds = model.model.predict(&GraphInput::new(&snap.graph, encoder))?;
            // Truncation keeps file order, so visible nodes map back in order.
            let visible = (0..g.len()).filter(|&i| g.depth(i) <= d);
            for (i, p) in visible.zip(preds) {
                nodes[i].steps.push(HorizonPrediction {
                    horizon: d,
                    label: p.label,
                    probabilities: p.probabilities,
                });
            }
        }
    }
    Ok(PredictionTrajectory {
        graph_id: g.id().to_owned(),
        model_kind: model.model.kind(),
        horizons,
        nodes,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub mae: f64,
    /// Rows are gold labels, columns predictions.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub gold_counts: [usize; NUM_CLASSES],
    pub predicted_counts: [usize; NUM_CLASSES],
}

impl EvalMetrics {
    /// Metrics over `(gold, predicted)` pairs. Empty input gives zero totals
    /// with accuracy and MAE of 0.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut m = EvalMetrics::default();
        let mut abs_error = 0usize;
        for (gold, pred) in pairs {
            let (g, p) = (gold as usize, pred as usize);
            m.confusion[g][p] += 1;
            m.gold_counts[g] += 1;
            m.predicted_counts[p] += 1;
            m.total += 1;
            m.correct += usize::from(g == p);
            abs_error += g.abs_diff(p);
        }
        if m.total > 0 {
            m.accuracy = m.correct as f64 / m.total as f64;
            m.mae = abs_error as f64 / m.total as f64;
        }
        m
    }
}

/// Scores each run's predictions at `at` against its gold labels.
///
/// Every node with a prediction at `at` must have a gold label.
pub fn metrics<'a>(
    runs: impl IntoIterator<Item = (&'a PredictionTrajectory, &'a [Option<u8>])>,
    at: Horizon,
) -> Result<EvalMetrics> {
    let mut pairs = Vec::new();
    for (traj, gold) in runs {
        if gold.len() != traj.nodes.len() {
            return Err(Error::TrajectoryMismatch(format!(
                "{} gold labels for {} nodes of {}",
                gold.len(),
                traj.nodes.len(),
                traj.graph_id
            )));
        }
        for (i, g) in gold.iter().enumerate() {
            let Some(pred) = traj.select(i, at) else { continue };
            let g = g.ok_or_else(|| Error::MissingLabel(traj.nodes[i].node_id.clone()))?;
            if g as usize >= NUM_CLASSES {
                return Err(Error::LabelOutOfRange {
                    id: traj.nodes[i].node_id.clone(),
                    label: i64::from(g),
                });
            }
            pairs.push((g, pred.label));
        }
    }
    Ok(EvalMetrics::from_pairs(pairs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon: usize,
    pub metrics: EvalMetrics,
}

/// Metrics file written by corpus evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u64,
    pub model_kind: ModelKind,
    pub graphs: usize,
    #[serde(rename = "final")]
    pub final_horizon: EvalMetrics,
    pub appearance: EvalMetrics,
    pub per_horizon: Vec<HorizonMetrics>,
}

impl EvalReport {
    /// Aggregates trajectories computed over `graphs` (same order).
    pub fn build(model_kind: ModelKind, graphs: &[DiscussionGraph], trajectories: &[PredictionTrajectory]) -> Result<Self> {
        if graphs.len() != trajectories.len() {
            return Err(Error::TrajectoryMismatch(format!(
                "{} graphs, {} trajectories",
                graphs.len(),
                trajectories.len()
            )));
        }
        for (g, t) in graphs.iter().zip(trajectories) {
            t.check_graph(g)?;
        }
        let gold: Vec<Vec<Option<u8>>> = graphs.iter().map(DiscussionGraph::gold_labels).collect();
        let runs = || trajectories.iter().zip(gold.iter().map(Vec::as_slice));
        let deepest = trajectories.iter().map(|t| t.horizons).max().unwrap_or(0);
        Ok(Self {
            format_version: crate::checkpoint::FORMAT_VERSION,
            model_kind,
            graphs: graphs.len(),
            final_horizon: metrics(runs(), Horizon::Final)?,
            appearance: metrics(runs(), Horizon::Appearance)?,
            per_horizon: (1..=deepest)
                .map(|d| {
                    Ok(HorizonMetrics {
                        horizon: d,
                        metrics: metrics(runs(), Horizon::At(d))?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

/// Replays and scores every graph sequentially.
pub fn evaluate_corpus(model: &TrainedModel, graphs: &[DiscussionGraph]) -> Result<EvalReport> {
    let trajectories = graphs
        .iter()
        .map(|g| stream_predict(model, g, &model.encoder))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::build(model.model.kind(), graphs, &trajectories)
}
