//! Node features derived from graph structure: asset type, degree,
//! PageRank centrality and label-propagation community, plus pairwise hop
//! distances.

mod centrality;
mod community;
mod paths;

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::Serialize;

pub use centrality::{compute_centrality, compute_degree, Centrality, PageRankConfig};
pub use community::{compute_communities, Communities, MAX_SWEEPS};
pub use paths::{bfs_hops, hops_between, shortest_path_hops, HopDistance};

use crate::error::{Error, Result};
use crate::graph::{AssetType, AssetTypes, LineageGraph};
use crate::linalg::Matrix;

pub const FEATURES_FILE: &str = "features.csv";
pub const FEATURES_HEADER: [&str; 5] = ["id", "asset_type", "degree", "centrality", "community"];

/// Slack allowed on the centrality total.
pub const CENTRALITY_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRow {
    pub id: String,
    pub asset_type: AssetType,
    pub degree: usize,
    pub centrality: f64,
    pub community: u32,
}

/// One row per node, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: Vec<FeatureRow>,
    index: HashMap<String, usize>,
}

impl FeatureTable {
    pub fn new(mut rows: Vec<FeatureRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if index.insert(row.id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate feature row {:?}", row.id)));
            }
        }
        let table = Self { rows, index };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Ok(());
        }
        let total: f64 = self.rows.iter().map(|r| r.centrality).sum();
        if (total - 1.0).abs() > CENTRALITY_SUM_TOL {
            return Err(Error::InvalidInput(format!("centrality sums to {total}, expected 1")));
        }
        if let Some(r) = self.rows.iter().find(|r| !(0.0..=1.0).contains(&r.centrality)) {
            return Err(Error::InvalidInput(format!(
                "centrality of {:?} outside [0, 1]",
                r.id
            )));
        }
        let count = self.community_count();
        let mut seen = vec![false; count];
        for r in &self.rows {
            seen[r.community as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("community labels are not contiguous".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FeatureRow> {
        self.index.get(id).map(|&i| &self.rows[i])
    }

    pub fn community_count(&self) -> usize {
        self.rows.iter().map(|r| r.community as usize + 1).max().unwrap_or(0)
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.community_count()];
        for r in &self.rows {
            sizes[r.community as usize] += 1;
        }
        sizes
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(FEATURES_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.id.clone(),
                r.asset_type.name.clone(),
                r.degree.to_string(),
                r.centrality.to_string(),
                r.community.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, asset_types: &AssetTypes) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let header = reader.headers()?.clone();
        if header.iter().ne(FEATURES_HEADER) {
            return Err(Error::Ingest {
                source_name: FEATURES_FILE,
                line: 1,
                message: format!("expected header `{}`", FEATURES_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let fail = |message: String| Error::Ingest {
                source_name: FEATURES_FILE,
                line,
                message,
            };
            let asset_type = asset_types
                .get(&record[1])
                .ok_or_else(|| fail(format!("unknown asset type {:?}", &record[1])))?
                .clone();
            rows.push(FeatureRow {
                id: record[0].to_owned(),
                asset_type,
                degree: record[2].parse().map_err(|e| fail(format!("degree: {e}")))?,
                centrality: record[3].parse().map_err(|e| fail(format!("centrality: {e}")))?,
                community: record[4].parse().map_err(|e| fail(format!("community: {e}")))?,
            });
        }
        Self::new(rows)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeriveConfig {
    pub pagerank: PageRankConfig,
    pub community_seed: u64,
}

/// Runs degree, centrality and community detection and joins them per node.
pub fn derive_features(graph: &LineageGraph, config: &DeriveConfig) -> Result<FeatureTable> {
    let degree = compute_degree(graph);
    let centrality = compute_centrality(graph, &config.pagerank)?;
    let communities = compute_communities(graph, config.community_seed);
    let rows = graph
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, node)| FeatureRow {
            id: node.id.clone(),
            asset_type: node.asset_type.clone(),
            degree: degree[i],
            centrality: centrality.scores[i],
            community: communities.labels[i],
        })
        .collect();
    FeatureTable::new(rows)
}

/// Dense encoder input, rows in graph index order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub ids: Vec<String>,
    pub columns: Vec<String>,
}

/// Per node: one-hot asset type, `ln(1 + degree)`, `centrality * N` (mean
/// 1), and the node's community size as a fraction of N.
pub fn build_feature_matrix(graph: &LineageGraph, features: &FeatureTable) -> Result<FeatureMatrix> {
    let n = graph.node_count();
    let k = graph.asset_types().len();
    let rows: Vec<&FeatureRow> = graph
        .nodes()
        .iter()
        .map(|node| {
            features.get(&node.id).ok_or_else(|| Error::NotFound {
                kind: "feature row for node",
                id: node.id.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let mut community_size: HashMap<u32, usize> = HashMap::new();
    for r in &rows {
        *community_size.entry(r.community).or_default() += 1;
    }

    let nf = n as f64;
    let mut values = Matrix::zeros(n, k + 3);
    for (i, (node, r)) in graph.nodes().iter().zip(&rows).enumerate() {
        let out = values.row_mut(i);
        out[node.asset_type.ordinal] = 1.0;
        out[k] = (r.degree as f64).ln_1p();
        out[k + 1] = r.centrality * nf;
        out[k + 2] = community_size[&r.community] as f64 / nf;
    }

    let mut columns: Vec<String> = graph
        .asset_types()
        .iter()
        .map(|t| format!("type:{}", t.name))
        .collect();
    columns.extend(["log_degree", "centrality_scaled", "community_fraction"].map(String::from));
    Ok(FeatureMatrix {
        values,
        ids: graph.nodes().iter().map(|n| n.id.clone()).collect(),
        columns,
    })
}
