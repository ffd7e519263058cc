//! Link-prediction recommendations over a typed lineage graph.
//!
//! The pipeline runs [`graph`] ingestion, [`features`] derivation, [`gnn`]
//! training and scoring, [`projection`] of the learned embedding, and
//! assembly of per-source [`recommend`] tables with stratified sampling and
//! expert annotations.

pub mod error;
pub mod features;
pub mod fixtures;
pub mod gnn;
pub mod graph;
pub mod linalg;
pub mod projection;
pub mod recommend;
pub mod synth;

pub use error::{Error, Result};
pub use features::{FeatureRow, FeatureTable, HopDistance};
pub use graph::{AssetType, AssetTypes, EdgeRecord, LineageGraph, NodeRecord};
pub use gnn::{EmbeddingMatrix, LinkScore, TrainConfig};
pub use projection::{Projection2D, ProjectionMethod};
pub use recommend::{Annotation, RecommendationRow, SampleSpec, Workbench};
