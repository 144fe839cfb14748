//! Ordinal hate-speech forecasting on discussion trees.
//!
//! Comments form a reply tree ([`discussion`]); each comment is embedded
//! ([`encoder`]) and a node model assigns every comment a label in `0..=4`
//! describing how much hateful discourse it leads to. Three model kinds share
//! one interface ([`model`]):
//!
//! - [`graphormer`]: full self-attention with tree-distance and degree
//!   encodings;
//! - [`gat`]: attention restricted to direct reply neighbors;
//! - [`comment_only`]: a per-comment scorer blind to the thread.
//!
//! [`training`] differentiates all three by reverse mode ([`autodiff`]),
//! [`eval`] replays threads depth by depth without exposing later comments,
//! [`report`] lays the results out as thread tables, and [`synth`] generates
//! corpora whose labels depend on context at a controlled tree distance.

pub mod autodiff;
pub mod checkpoint;
pub mod comment_only;
pub mod discussion;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod gat;
pub mod graphormer;
pub mod model;
pub mod params;
pub mod prediction;
pub mod report;
pub mod synth;
pub mod tensor;
pub mod training;

pub use checkpoint::TrainedModel;
pub use discussion::{parse_thread, Comment, Degree, DepthSnapshot, DiscussionGraph};
pub use encoder::{encode, encode_graph, tokenize, EncoderSpec, NodeFeatureMatrix, TextEncoder};
pub use error::{Error, Result};
pub use eval::{metrics, stream_predict, EvalMetrics, EvalReport, Horizon, PredictionTrajectory};
pub use model::{GraphInput, LossKind, Model, ModelConfig, ModelKind, NodePrediction};
pub use prediction::{predict, OrdinalPrediction};
pub use report::{render_report, ReportFormat, ReportOptions};
pub use synth::{ambiguity_audit, generate, oracle_label, GenSpec, SyntheticCorpus};
pub use tensor::Matrix;
pub use training::{train, Example, TrainConfig};
