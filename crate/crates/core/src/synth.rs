//! Seeded generator for typed lineage graphs.
//!
//! Edges follow a fixed schema (databases and curated sources feed tables,
//! tables feed workflows, workflows feed workbooks, users own tables and view
//! workbooks). Destinations are drawn by preferential attachment within each
//! type pair, which gives the skewed degree and centrality distributions seen
//! in real catalogs.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{
    write_nodes_csv, AssetTypes, EdgeRecord, GraphBuilder, LineageGraph, NodeRecord, EDGES_FILE,
    EDGES_HEADER, NODES_FILE,
};

/// `(source type, destination type, relation)` triples the generator may emit.
pub const SCHEMA: [(&str, &str, &str); 6] = [
    ("database", "table", "lineage"),
    ("curated-source", "table", "lineage"),
    ("table", "workflow", "lineage"),
    ("workflow", "workbook", "lineage"),
    ("user", "table", "owns"),
    ("user", "workbook", "views"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct FanOut {
    pub src_type: String,
    pub dst_type: String,
    pub relation: String,
    /// Mean number of distinct destinations per source node.
    pub mean: f64,
}

impl FanOut {
    fn new(src: &str, dst: &str, relation: &str, mean: f64) -> Self {
        Self {
            src_type: src.into(),
            dst_type: dst.into(),
            relation: relation.into(),
            mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Node count per asset type name.
    pub counts: BTreeMap<String, usize>,
    /// Fan-out per lineage or ownership type pair.
    pub fan_out: Vec<FanOut>,
    /// Mean workbooks viewed per user.
    pub views_per_user: f64,
    /// Baseline attachment weight of every target; smaller values concentrate
    /// edges on already-popular targets.
    pub attachment_offset: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// About two thousand nodes and four thousand edges.
    fn default() -> Self {
        Self {
            counts: counts(&[
                ("user", 400),
                ("database", 100),
                ("curated-source", 100),
                ("table", 700),
                ("workflow", 300),
                ("workbook", 400),
            ]),
            fan_out: vec![
                FanOut::new("database", "table", "lineage", 4.0),
                FanOut::new("curated-source", "table", "lineage", 3.0),
                FanOut::new("table", "workflow", "lineage", 1.5),
                FanOut::new("workflow", "workbook", "lineage", 2.0),
                FanOut::new("user", "table", "owns", 0.5),
            ],
            views_per_user: 3.0,
            attachment_offset: 0.1,
            seed: 0,
        }
    }
}

fn counts(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
    pairs.iter().map(|&(k, v)| (k.to_owned(), v)).collect()
}

impl SynthConfig {
    /// A catalog-sized preset: 211,515 nodes and roughly half a million edges.
    pub fn catalog_scale() -> Self {
        Self {
            counts: counts(&[
                ("user", 42_000),
                ("database", 10_500),
                ("curated-source", 10_500),
                ("table", 74_000),
                ("workflow", 31_515),
                ("workbook", 43_000),
            ]),
            fan_out: vec![
                FanOut::new("database", "table", "lineage", 8.0),
                FanOut::new("curated-source", "table", "lineage", 6.0),
                FanOut::new("table", "workflow", "lineage", 2.0),
                FanOut::new("workflow", "workbook", "lineage", 2.5),
                FanOut::new("user", "table", "owns", 1.0),
            ],
            views_per_user: 2.5,
            attachment_offset: 0.25,
            seed: 0,
        }
    }

    /// Default fan-out rules with node counts for the listed types only.
    pub fn only(counts_by_type: &[(&str, usize)]) -> Self {
        Self {
            counts: counts(counts_by_type),
            ..Self::default()
        }
    }

    pub fn total_nodes(&self) -> usize {
        self.counts.values().sum()
    }

    fn rules(&self) -> Vec<FanOut> {
        let mut rules = self.fan_out.clone();
        rules.push(FanOut::new("user", "workbook", "views", self.views_per_user));
        rules
    }

    pub fn validate(&self, asset_types: &AssetTypes) -> Result<()> {
        if self.total_nodes() == 0 {
            return Err(Error::InvalidInput("synthetic graph needs at least one node".into()));
        }
        if let Some(name) = self.counts.keys().find(|t| asset_types.get(t).is_none()) {
            return Err(Error::InvalidInput(format!("unknown asset type {name:?}")));
        }
        if !(self.attachment_offset.is_finite() && self.attachment_offset > 0.0) {
            return Err(Error::InvalidInput("attachment_offset must be positive".into()));
        }
        for r in self.rules() {
            if !(r.mean.is_finite() && r.mean >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "fan-out {} -> {} must be non-negative",
                    r.src_type, r.dst_type
                )));
            }
            let allowed = SCHEMA.iter().any(|&(s, d, rel)| {
                s == r.src_type && d == r.dst_type && rel == r.relation
            });
            if !allowed {
                return Err(Error::InvalidInput(format!(
                    "{} -[{}]-> {} is not in the lineage schema",
                    r.src_type, r.relation, r.dst_type
                )));
            }
        }
        Ok(())
    }
}

/// Generated node and edge tables, in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthGraph {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

fn id_prefix(asset_type: &str) -> &str {
    match asset_type {
        "user" => "user",
        "database" => "db",
        "curated-source" => "cs",
        "table" => "tbl",
        "workflow" => "wf",
        "workbook" => "wb",
        other => other,
    }
}

fn title_case(s: &str) -> String {
    s.split('-')
        .map(|w| {
            let mut c = w.chars();
            c.next()
                .map(|f| f.to_uppercase().chain(c).collect::<String>())
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn generate(config: &SynthConfig, asset_types: &AssetTypes) -> Result<SynthGraph> {
    config.validate(asset_types)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut nodes = Vec::with_capacity(config.total_nodes());
    let mut ids_by_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for ty in asset_types.iter() {
        let count = config.counts.get(&ty.name).copied().unwrap_or(0);
        let prefix = id_prefix(&ty.name);
        let title = title_case(&ty.name);
        let slots = ids_by_type.entry(ty.name.as_str()).or_default();
        for i in 0..count {
            let month = rng.gen_range(1..=12);
            let day = rng.gen_range(1..=28);
            let meta = BTreeMap::from([(
                "created".to_owned(),
                format!("2022-{month:02}-{day:02}"),
            )]);
            slots.push(nodes.len());
            nodes.push(NodeRecord {
                id: format!("{prefix}-{i}"),
                asset_type: ty.clone(),
                label: format!("{title} {i}"),
                meta,
            });
        }
    }

    let mut edges = Vec::new();
    let mut picked: Vec<usize> = Vec::new();
    for rule in config.rules() {
        let sources = ids_by_type.get(rule.src_type.as_str()).map_or(&[][..], Vec::as_slice);
        let targets = ids_by_type.get(rule.dst_type.as_str()).map_or(&[][..], Vec::as_slice);
        if sources.is_empty() || targets.is_empty() {
            continue;
        }
        // A target is drawn with probability proportional to
        // `attachment_offset` plus the number of times it was already chosen.
        let fresh_weight = config.attachment_offset * targets.len() as f64;
        let mut urn: Vec<usize> = Vec::new();
        let whole = rule.mean.floor();
        let frac = rule.mean - whole;
        for &s in sources {
            let mut k = whole as usize + usize::from(rng.gen_bool(frac));
            k = k.min(targets.len());
            picked.clear();
            let mut attempts = 0;
            while picked.len() < k && attempts < 50 * k {
                attempts += 1;
                let r = rng.gen_range(0.0..fresh_weight + urn.len() as f64);
                let t = if r < fresh_weight || urn.is_empty() {
                    targets[rng.gen_range(0..targets.len())]
                } else {
                    urn[((r - fresh_weight) as usize).min(urn.len() - 1)]
                };
                if !picked.contains(&t) {
                    picked.push(t);
                }
            }
            for &t in &picked {
                urn.push(t);
                edges.push(EdgeRecord {
                    src: nodes[s].id.clone(),
                    dst: nodes[t].id.clone(),
                    relation: rule.relation.clone(),
                });
            }
        }
    }
    Ok(SynthGraph { nodes, edges })
}

impl SynthGraph {
    pub fn to_graph(&self, asset_types: &AssetTypes) -> Result<LineageGraph> {
        let mut b = GraphBuilder::new(asset_types.clone());
        for n in &self.nodes {
            b.add_node(n.clone())?;
        }
        for e in &self.edges {
            b.add_edge(&e.src, &e.dst, &e.relation)?;
        }
        Ok(b.build())
    }

    /// Writes `nodes.csv` and `edges.csv` into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_nodes_csv(BufWriter::new(File::create(dir.join(NODES_FILE))?), &self.nodes)?;
        let mut out = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(EDGES_FILE))?));
        out.write_record(EDGES_HEADER)?;
        for e in &self.edges {
            out.write_record([&e.src, &e.dst, &e.relation])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `(asset type, node count)` in asset-type order.
    pub fn node_summary(&self) -> Vec<(String, usize)> {
        let mut counts: BTreeMap<usize, (String, usize)> = BTreeMap::new();
        for n in &self.nodes {
            counts
                .entry(n.asset_type.ordinal)
                .or_insert_with(|| (n.asset_type.name.clone(), 0))
                .1 += 1;
        }
        counts.into_values().collect()
    }

    /// `(relation, edge count)` sorted by relation.
    pub fn edge_summary(&self) -> Vec<(String, usize)> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &self.edges {
            *counts.entry(e.relation.as_str()).or_default() += 1;
        }
        counts.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }
}
