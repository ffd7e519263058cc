//! Per-source recommendation tables joined with graph context, stratified
//! sampling over the probability range, and the expert annotation store.

mod annotations;
mod sample;

use serde::Serialize;

pub use annotations::{
    Annotation, AnnotationStore, ImportReport, RejectedRow, ANNOTATIONS_FILE, ANNOTATIONS_HEADER,
    MAX_STARS, MIN_STARS,
};
pub use sample::{stratified_sample, SampleSpec};

use crate::error::{Error, Result};
use crate::features::{bfs_hops, FeatureTable, HopDistance};
use crate::gnn::{ranking_order, EmbeddingMatrix};
use crate::graph::{AssetType, LineageGraph};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationRow {
    pub source: String,
    pub destination: String,
    pub probability: f64,
    pub dest_asset_type: AssetType,
    pub dest_degree: usize,
    pub dest_centrality: f64,
    pub dest_community: u32,
    pub same_community: bool,
    /// Serialised as the hop count, or -1 when unreachable.
    pub hop_distance: HopDistance,
    pub existing_edge: bool,
}

/// Graph, features and embedding checked to describe the same node set.
#[derive(Debug, Clone)]
pub struct Workbench {
    graph: LineageGraph,
    features: FeatureTable,
    embedding: EmbeddingMatrix,
    /// Embedding row of each graph index.
    embedding_row: Vec<usize>,
}

/// How many mismatched ids an inconsistency error lists before eliding.
const MISMATCH_PREVIEW: usize = 5;

fn mismatch(what: &str, ids: &[&str]) -> Error {
    let shown: Vec<&str> = ids.iter().take(MISMATCH_PREVIEW).copied().collect();
    let more = ids.len().saturating_sub(MISMATCH_PREVIEW);
    let suffix = if more > 0 { format!(" and {more} more") } else { String::new() };
    Error::Inconsistent(format!("{what}: {}{suffix}", shown.join(", ")))
}

/// Checks that the three artifacts cover the same node set and returns the
/// embedding row of every graph index.
fn check_consistency(
    graph: &LineageGraph,
    features: &FeatureTable,
    embedding: &EmbeddingMatrix,
) -> Result<Vec<usize>> {
    let missing: Vec<&str> = graph
        .nodes()
        .iter()
        .map(|n| n.id.as_str())
        .filter(|id| features.get(id).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(mismatch("graph nodes without features", &missing));
    }
    let extra: Vec<&str> = features
        .rows()
        .iter()
        .map(|r| r.id.as_str())
        .filter(|id| !graph.contains(id))
        .collect();
    if !extra.is_empty() {
        return Err(mismatch("feature rows for unknown nodes", &extra));
    }
    let mut embedding_row = Vec::with_capacity(graph.node_count());
    let mut missing = Vec::new();
    for node in graph.nodes() {
        match embedding.row_of(&node.id) {
            Ok(r) => embedding_row.push(r),
            Err(_) => missing.push(node.id.as_str()),
        }
    }
    if !missing.is_empty() {
        return Err(mismatch("graph nodes without embeddings", &missing));
    }
    if embedding.len() != graph.node_count() {
        let extra: Vec<&str> = embedding
            .ids()
            .iter()
            .map(String::as_str)
            .filter(|id| !graph.contains(id))
            .collect();
        return Err(mismatch("embeddings for unknown nodes", &extra));
    }
    Ok(embedding_row)
}

impl Workbench {
    pub fn new(graph: LineageGraph, features: FeatureTable, embedding: EmbeddingMatrix) -> Result<Self> {
        let embedding_row = check_consistency(&graph, &features, &embedding)?;
        Ok(Self {
            graph,
            features,
            embedding,
            embedding_row,
        })
    }

    pub fn graph(&self) -> &LineageGraph {
        &self.graph
    }

    pub fn features(&self) -> &FeatureTable {
        &self.features
    }

    pub fn embedding(&self) -> &EmbeddingMatrix {
        &self.embedding
    }

    /// One row per destination other than `source`, ranked by descending
    /// probability with ties broken by destination id.
    pub fn recommendations(&self, source: &str) -> Result<Vec<RecommendationRow>> {
        rank_destinations(&self.graph, &self.features, &self.embedding, &self.embedding_row, source)
    }
}

/// Builds the recommendation table for `source`: one BFS for hop distances
/// and one scoring sweep over the embedding.
pub fn build_recommendations(
    graph: &LineageGraph,
    features: &FeatureTable,
    embedding: &EmbeddingMatrix,
    source: &str,
) -> Result<Vec<RecommendationRow>> {
    let embedding_row = check_consistency(graph, features, embedding)?;
    rank_destinations(graph, features, embedding, &embedding_row, source)
}

fn rank_destinations(
    graph: &LineageGraph,
    features: &FeatureTable,
    embedding: &EmbeddingMatrix,
    embedding_row: &[usize],
    source: &str,
) -> Result<Vec<RecommendationRow>> {
    let s = graph.require_index(source)?;
    let hops = bfs_hops(graph, s);
    // Feature rows and graph indices are both sorted by id.
    let feature = |idx: usize| &features.rows()[idx];
    let src_row = embedding_row[s];
    let src_community = feature(s).community;

    let mut scored: Vec<(f64, usize)> = (0..graph.node_count())
        .filter(|&j| j != s)
        .map(|j| (embedding.probability(src_row, embedding_row[j]), j))
        .collect();
    scored.sort_by(|a, b| ranking_order((a.0, graph.id(a.1)), (b.0, graph.id(b.1))));

    let mut adjacent = vec![false; graph.node_count()];
    for &v in graph.neighbor_indices(s) {
        adjacent[v as usize] = true;
    }

    scored
        .into_iter()
        .map(|(probability, j)| {
            let f = feature(j);
            let row = RecommendationRow {
                source: source.to_owned(),
                destination: f.id.clone(),
                probability,
                dest_asset_type: f.asset_type.clone(),
                dest_degree: f.degree,
                dest_centrality: f.centrality,
                dest_community: f.community,
                same_community: f.community == src_community,
                hop_distance: hops[j],
                existing_edge: adjacent[j],
            };
            if row.existing_edge && row.hop_distance != HopDistance::Hops(1) {
                return Err(Error::Inconsistent(format!(
                    "{source} -> {} is an edge but {} hops apart",
                    row.destination,
                    row.hop_distance.to_i64()
                )));
            }
            Ok(row)
        })
        .collect()
}
