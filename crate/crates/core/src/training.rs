//! Losses, reverse-mode gradients, optimizer steps and the training loop.
//!
//! The reference loop is single-threaded: identical seed, corpus and
//! configuration give bitwise-identical parameters and loss history.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::comment_only::CommentOnlyConfig;
use crate::discussion::{Comment, DiscussionGraph};
use crate::encoder::EncoderSpec;
use crate::error::{Error, Result};
use crate::gat::GatConfig;
use crate::graphormer::GraphormerConfig;
use crate::model::{validate_labels, GraphInput, LossKind, Model, ModelConfig, ModelKind};
use crate::params::{GradientSet, ParamSet};
use crate::prediction::{OrdinalPrediction, NUM_CLASSES};
use crate::tensor::softmax;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub loss: LossKind,
    pub l2_penalty: f64,
    pub init_scale: f64,
    /// Graphs per optimizer step.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 60,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            loss: LossKind::Ce,
            l2_penalty: 1e-4,
            init_scale: 1.0,
            batch_size: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        // A zero rate is allowed: it freezes the parameters.
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and >= 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return bad("l2_penalty must be finite and >= 0");
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return bad("init_scale must be positive");
        }
        if self.optimizer == OptimizerKind::Adam
            && !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0)
        {
            return bad("adam needs beta1, beta2 in [0, 1) and epsilon > 0");
        }
        Ok(())
    }
}

/// Loss of 5-way predictions against gold labels, averaged over labeled
/// nodes.
///
/// `Ce` is the cross-entropy of the gold class; `OrdinalWeighted` is the
/// expected ordinal distance `sum_c p_c * |c - gold|`.
pub fn loss(predictions: &[OrdinalPrediction], gold: &[Option<u8>], kind: LossKind) -> Result<f64> {
    validate_labels(gold, predictions.len())?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (pred, g) in predictions.iter().zip(gold) {
        let Some(g) = g else { continue };
        let g = *g as usize;
        total += match kind {
            LossKind::Ce => {
                let max = pred.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + pred.logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                lse - pred.logits[g]
            }
            LossKind::OrdinalWeighted => {
                let p = softmax(&pred.logits);
                (0..NUM_CLASSES).map(|c| p[c] * (c as f64 - g as f64).abs()).sum()
            }
        };
        count += 1;
    }
    Ok(total / count as f64)
}

/// One training graph with its precomputed model inputs.
#[derive(Clone, Debug)]
pub struct Example {
    pub graph_id: String,
    pub input: GraphInput,
    pub labels: Vec<Option<u8>>,
}

impl Example {
    pub fn new(g: &DiscussionGraph, encoder: &EncoderSpec) -> Self {
        Self {
            graph_id: g.id().to_owned(),
            input: GraphInput::new(g, encoder),
            labels: g.gold_labels(),
        }
    }

    pub fn has_labels(&self) -> bool {
        self.labels.iter().any(Option::is_some)
    }
}

/// Mean batch loss plus `l2 * sum(p^2)`, and its exact gradient.
pub fn grads(model: &Model, batch: &[&Example], kind: LossKind, l2_penalty: f64) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let weight = 1.0 / batch.len() as f64;
    let mut total = model.params().zeros_like();
    let mut value = 0.0;
    for ex in batch {
        let mut tape = Tape::new();
        let p = model.params().bind(&mut tape);
        let out = model.trace_loss(&mut tape, &p, &ex.input, &ex.labels, kind)?;
        let l = tape.scalar(out);
        if !l.is_finite() {
            return Err(Error::NonFinite(format!("loss on graph {}", ex.graph_id)));
        }
        value += weight * l;
        let mut g = tape.backward(out);
        for (name, var) in p.iter() {
            if let Some(m) = g.take(*var) {
                if !m.is_finite() {
                    return Err(Error::NonFinite(format!("gradient of {name}")));
                }
                let acc = total.get_mut(name).expect("congruent");
                for (a, b) in acc.data_mut().iter_mut().zip(m.data()) {
                    *a += weight * b;
                }
            }
        }
    }
    if l2_penalty > 0.0 {
        for (name, p) in model.params().iter() {
            let acc = total.get_mut(name).expect("congruent");
            for (a, &x) in acc.data_mut().iter_mut().zip(p.data()) {
                *a += 2.0 * l2_penalty * x;
                value += l2_penalty * x * x;
            }
        }
    }
    Ok((value, total))
}

/// Objective value only; the same quantity [`grads`] differentiates.
pub fn objective(model: &Model, batch: &[&Example], kind: LossKind, l2_penalty: f64) -> Result<f64> {
    let weight = 1.0 / batch.len() as f64;
    let mut value = 0.0;
    for ex in batch {
        let mut tape = Tape::new();
        let p = model.params().bind(&mut tape);
        let out = model.trace_loss(&mut tape, &p, &ex.input, &ex.labels, kind)?;
        value += weight * tape.scalar(out);
    }
    if l2_penalty > 0.0 {
        for (_, p) in model.params().iter() {
            value += l2_penalty * p.data().iter().map(|x| x * x).sum::<f64>();
        }
    }
    Ok(value)
}

#[derive(Clone, Debug, PartialEq)]
pub enum OptimizerState {
    Sgd,
    Adam { step: u64, m: ParamSet, v: ParamSet },
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &ParamSet) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam {
                step: 0,
                m: params.zeros_like(),
                v: params.zeros_like(),
            },
        }
    }
}

/// Applies one update in place.
pub fn step(params: &mut ParamSet, grads: &GradientSet, config: &TrainConfig, state: &mut OptimizerState) -> Result<()> {
    params.check_congruent(grads)?;
    let lr = config.learning_rate;
    match state {
        OptimizerState::Sgd => {
            for ((_, p), (_, g)) in params.iter_mut().zip(grads.iter()) {
                for (x, d) in p.data_mut().iter_mut().zip(g.data()) {
                    *x -= lr * d;
                }
            }
        }
        OptimizerState::Adam { step, m, v } => {
            params.check_congruent(m)?;
            *step += 1;
            let t = *step as i32;
            let (b1, b2) = (config.beta1, config.beta2);
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            let iter = params.iter_mut().zip(grads.iter()).zip(m.iter_mut().zip(v.iter_mut()));
            for (((_, p), (_, g)), ((_, m), (_, v))) in iter {
                let slots = p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
                for ((x, &d), (mi, vi)) in slots {
                    *mi = b1 * *mi + (1.0 - b1) * d;
                    *vi = b2 * *vi + (1.0 - b2) * d * d;
                    let m_hat = *mi / c1;
                    let v_hat = *vi / c2;
                    *x -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean objective per epoch.
    pub history: Vec<f64>,
    /// Ids of graphs dropped because they carry no gold labels.
    pub skipped: Vec<String>,
}

pub fn train(corpus: &[Example], model_config: &ModelConfig, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let (usable, skipped): (Vec<&Example>, Vec<&Example>) = corpus.iter().partition(|e| e.has_labels());
    if usable.is_empty() {
        return Err(Error::NoLabels);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::init(model_config, config.init_scale, &mut rng)?;
    let mut state = OptimizerState::new(config.optimizer, model.params());
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| usable[i]).collect();
            let (value, g) = grads(&model, &batch, config.loss, config.l2_penalty)?;
            epoch_total += value * batch.len() as f64;
            step(model.params_mut(), &g, config, &mut state)?;
        }
        history.push(epoch_total / usable.len() as f64);
    }

    Ok(TrainOutcome {
        model,
        history,
        skipped: skipped.iter().map(|e| e.graph_id.clone()).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub model_kind: ModelKind,
    pub coordinates: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// Same ratio with a `1e-8` floor; dominated by rounding noise on
    /// near-zero coordinates.
    pub max_relative_error_tight_floor: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

const REL_FLOOR: f64 = 1e-6;

/// Compares [`grads`] against central differences on every coordinate.
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`. Central differences
/// at `h = 1e-5` carry about `1e-11 * |loss|` of rounding noise, so
/// coordinates below the floor are held to an absolute error of `1e-10`.
pub fn finite_difference_check(
    model: &Model,
    batch: &[&Example],
    kind: LossKind,
    l2_penalty: f64,
    h: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = grads(model, batch, kind, l2_penalty)?;
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        model_kind: model.kind(),
        coordinates: 0,
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        max_relative_error_tight_floor: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for (name, g) in analytic.iter() {
        for k in 0..g.data().len() {
            let original = model.params().tensor(name).data()[k];
            probe.params_mut().get_mut(name).expect("tensor").data_mut()[k] = original + h;
            let plus = objective(&probe, batch, kind, l2_penalty)?;
            probe.params_mut().get_mut(name).expect("tensor").data_mut()[k] = original - h;
            let minus = objective(&probe, batch, kind, l2_penalty)?;
            probe.params_mut().get_mut(name).expect("tensor").data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = g.data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.coordinates += 1;
            report.max_absolute_error = report.max_absolute_error.max((a - numeric).abs());
            report.max_relative_error_tight_floor = report
                .max_relative_error_tight_floor
                .max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8));
            if rel > report.max_relative_error || report.worst_tensor.is_empty() {
                report.max_relative_error = rel;
                report.worst_tensor = name.clone();
                report.worst_index = k;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Random tree of `n` nodes: node `i > 0` replies to a uniformly chosen
/// earlier node. Labels are drawn uniformly from 0..=4.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> DiscussionGraph {
    const WORDS: [&str; 12] = [
        "yes", "no", "maybe", "they", "always", "never", "thread", "post", "agree", "wrong", "f*ck", "lol",
    ];
    let comments = (0..n)
        .map(|i| {
            let len = rng.gen_range(1..6);
            let text = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ");
            Comment {
                id: format!("n{i}"),
                parent_id: (i > 0).then(|| format!("n{}", rng.gen_range(0..i))),
                text,
                gold_label: Some(rng.gen_range(0..=4)),
                author: None,
            }
        })
        .collect();
    DiscussionGraph::new("random", None, comments).expect("random tree is valid")
}

/// Tiny configuration of `kind` used for gradient verification:
/// 2 layers, 2 heads, width 8 for the graph models; hidden width 8 for
/// the comment-only scorer.
pub fn grad_check_config(kind: ModelKind, input_dim: usize) -> ModelConfig {
    match kind {
        ModelKind::Graphormer => ModelConfig::Graphormer(GraphormerConfig {
            num_layers: 2,
            num_heads: 2,
            model_dim: 8,
            ffn_dim: 8,
            max_distance: 8,
            max_degree: 16,
            input_dim,
        }),
        ModelKind::Gat => ModelConfig::Gat(GatConfig {
            num_layers: 2,
            num_heads: 2,
            model_dim: 8,
            input_dim,
            negative_slope: 0.2,
        }),
        ModelKind::CommentOnly => ModelConfig::CommentOnly(CommentOnlyConfig { input_dim, hidden_dim: 8 }),
    }
}

/// Seeded end-to-end gradient check on a random 7-node graph with
/// randomized parameters.
pub fn grad_check(kind: ModelKind, seed: u64, loss: LossKind) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_tree(7, &mut rng);
    let encoder = EncoderSpec {
        dim: 16,
        hash_seed: seed,
        normalize: true,
    };
    let example = Example::new(&g, &encoder);
    let config = grad_check_config(kind, encoder.dim);
    let base = Model::init(&config, 1.0, &mut rng)?;
    let params = base.params().random_like(0.5, &mut rng);
    let model = Model::from_parts(&config, params)?;
    finite_difference_check(&model, &[&example], loss, 0.0, 1e-5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_prediction() -> OrdinalPrediction {
        OrdinalPrediction::from_logits(&[0.0; 5]).unwrap()
    }

    #[test]
    fn analytic_loss_values() {
        let preds = vec![uniform_prediction(); 3];
        let ce = loss(&preds, &[Some(0), Some(2), Some(4)], LossKind::Ce).unwrap();
        assert!((ce - 5f64.ln()).abs() < 1e-12);
        let ow = loss(&preds[..1], &[Some(4)], LossKind::OrdinalWeighted).unwrap();
        assert!((ow - 2.0).abs() < 1e-12);

        let one_hot = OrdinalPrediction::from_logits(&[-1000.0, -1000.0, 0.0, -1000.0, -1000.0]).unwrap();
        assert_eq!(loss(&[one_hot], &[Some(2)], LossKind::OrdinalWeighted).unwrap(), 0.0);
    }

    #[test]
    fn loss_errors() {
        let preds = vec![uniform_prediction(); 2];
        assert!(matches!(loss(&preds, &[None, None], LossKind::Ce), Err(Error::NoLabels)));
        assert!(matches!(loss(&preds, &[Some(7), None], LossKind::Ce), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn sgd_arithmetic() {
        let mut p = ParamSet::new();
        p.insert("w", crate::tensor::Matrix::filled(1, 1, 1.0));
        let mut g = ParamSet::new();
        g.insert("w", crate::tensor::Matrix::filled(1, 1, 0.5));
        let cfg = TrainConfig {
            learning_rate: 0.1,
            optimizer: OptimizerKind::Sgd,
            ..Default::default()
        };
        let mut state = OptimizerState::new(OptimizerKind::Sgd, &p);
        step(&mut p, &g, &cfg, &mut state).unwrap();
        assert!((p.tensor("w").get(0, 0) - 0.95).abs() < 1e-15);

        let before = p.clone();
        step(&mut p, &g.zeros_like(), &cfg, &mut state).unwrap();
        assert_eq!(p, before);

        let mut wrong = ParamSet::new();
        wrong.insert("v", crate::tensor::Matrix::filled(1, 1, 0.5));
        assert!(step(&mut p, &wrong, &cfg, &mut state).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_ok());
        assert!(TrainConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
        let parsed: TrainConfig = serde_json::from_str(r#"{"learning_rate":0.01,"loss":"ordinal_weighted"}"#).unwrap();
        assert_eq!(parsed.loss, LossKind::OrdinalWeighted);
        assert_eq!(parsed.epochs, TrainConfig::default().epochs);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr":0.01}"#).is_err());
    }
}
