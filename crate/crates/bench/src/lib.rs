//! Shared workloads for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use replygraph_core::checkpoint::TrainedModel;
use replygraph_core::training::{random_tree, Example};
use replygraph_core::{DiscussionGraph, EncoderSpec, Model, ModelConfig, ModelKind};

pub struct Workload {
    pub graph: DiscussionGraph,
    pub example: Example,
    pub model: TrainedModel,
}

/// A seeded random reply tree of `nodes` comments and a freshly initialized
/// model of `kind` with default settings.
pub fn workload(kind: ModelKind, nodes: usize, seed: u64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = random_tree(nodes, &mut rng);
    let encoder = EncoderSpec::default();
    let model = Model::init(&ModelConfig::default_for(kind, encoder.dim), 1.0, &mut rng).expect("default config is valid");
    Workload {
        example: Example::new(&graph, &encoder),
        model: TrainedModel::new(model, encoder).expect("encoder matches"),
        graph,
    }
}
