//! Workloads shared by the benchmarks.

use rekom_core::features::{build_feature_matrix, derive_features, DeriveConfig, FeatureMatrix};
use rekom_core::gnn::train;
use rekom_core::synth::{generate, SynthConfig};
use rekom_core::{AssetTypes, EmbeddingMatrix, FeatureTable, LineageGraph, TrainConfig};

/// The default synthetic graph scaled by `factor` in every node count.
pub fn synthetic_graph(factor: usize) -> LineageGraph {
    let mut config = SynthConfig::default();
    config.counts.values_mut().for_each(|c| *c *= factor);
    let types = AssetTypes::default();
    generate(&config, &types)
        .and_then(|g| g.to_graph(&types))
        .expect("default synthetic config is valid")
}

pub fn features(graph: &LineageGraph) -> (FeatureTable, FeatureMatrix) {
    let table = derive_features(graph, &DeriveConfig::default()).expect("non-empty graph");
    let matrix = build_feature_matrix(graph, &table).expect("features cover the graph");
    (table, matrix)
}

/// A briefly trained embedding; ranking cost does not depend on its quality.
pub fn embedding(graph: &LineageGraph, matrix: &FeatureMatrix) -> EmbeddingMatrix {
    let config = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    train(graph, matrix, &config).expect("valid training config").embedding
}

/// The first user node, a typical recommendation source.
pub fn first_user(graph: &LineageGraph) -> String {
    graph
        .nodes()
        .iter()
        .find(|n| n.asset_type.name == "user")
        .map(|n| n.id.clone())
        .expect("synthetic graphs have users")
}
