//! Typed lineage graph: ingestion, validation and neighbor queries.
//!
//! Nodes are kept sorted by id, so a node's index doubles as its rank in
//! id order. Every derived table (features, embeddings, projections) uses
//! the same ordering. Edges are stored once and viewed as undirected; the
//! relation label is kept for display only.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_ASSET_TYPES: [&str; 6] = [
    "user",
    "database",
    "table",
    "workflow",
    "workbook",
    "curated-source",
];

pub const NODES_HEADER: [&str; 4] = ["id", "asset_type", "label", "meta_json"];
pub const EDGES_HEADER: [&str; 3] = ["src", "dst", "relation"];
pub const NODES_FILE: &str = "nodes.csv";
pub const EDGES_FILE: &str = "edges.csv";

/// A configured category of analytic asset. Serializes as its name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssetType {
    pub name: String,
    pub ordinal: usize,
}

impl Serialize for AssetType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

/// The configured asset-type set; ordinals are `0..len()` in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssetTypes {
    types: Vec<AssetType>,
    by_name: HashMap<String, usize>,
}

impl AssetTypes {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut types = Vec::new();
        let mut by_name = HashMap::new();
        for name in names {
            let name = name.into();
            if name.is_empty() {
                return Err(Error::InvalidInput("empty asset type name".into()));
            }
            let ordinal = types.len();
            if by_name.insert(name.clone(), ordinal).is_some() {
                return Err(Error::InvalidInput(format!("duplicate asset type {name:?}")));
            }
            types.push(AssetType { name, ordinal });
        }
        if types.is_empty() {
            return Err(Error::InvalidInput("asset type set is empty".into()));
        }
        Ok(Self { types, by_name })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&AssetType> {
        self.by_name.get(name).map(|&i| &self.types[i])
    }

    pub fn by_ordinal(&self, ordinal: usize) -> Option<&AssetType> {
        self.types.get(ordinal)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AssetType> {
        self.types.iter()
    }

    pub fn names(&self) -> Vec<&str> {
        self.types.iter().map(|t| t.name.as_str()).collect()
    }
}

impl Default for AssetTypes {
    fn default() -> Self {
        Self::new(DEFAULT_ASSET_TYPES).expect("default asset types are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeRecord {
    pub id: String,
    pub asset_type: AssetType,
    pub label: String,
    pub meta: BTreeMap<String, String>,
}

impl NodeRecord {
    /// Compact JSON with keys in sorted order.
    pub fn meta_json(&self) -> String {
        serde_json::to_string(&self.meta).expect("string map serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub relation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeRef<'a> {
    pub src: &'a str,
    pub dst: &'a str,
    pub relation: &'a str,
}

impl EdgeRef<'_> {
    pub fn to_record(&self) -> EdgeRecord {
        EdgeRecord {
            src: self.src.to_owned(),
            dst: self.dst.to_owned(),
            relation: self.relation.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct StoredEdge {
    src: u32,
    dst: u32,
    relation: u32,
}

/// Immutable after construction; share it behind an `Arc` for concurrent readers.
#[derive(Debug, Clone)]
pub struct LineageGraph {
    asset_types: AssetTypes,
    nodes: Vec<NodeRecord>,
    index: HashMap<String, u32>,
    relations: Vec<String>,
    edges: Vec<StoredEdge>,
    // CSR undirected adjacency, neighbors sorted by index (= id order).
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub nodes: usize,
    pub edges: usize,
    pub duplicate_edges: usize,
}

impl LineageGraph {
    pub fn empty(asset_types: AssetTypes) -> Self {
        GraphBuilder::new(asset_types).build()
    }

    pub fn asset_types(&self) -> &AssetTypes {
        &self.asset_types
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &NodeRecord {
        &self.nodes[idx]
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.nodes[idx].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).map(|&i| i as usize)
    }

    pub fn require_index(&self, id: &str) -> Result<usize> {
        self.index_of(id).ok_or_else(|| Error::node_not_found(id))
    }

    pub fn get_node(&self, id: &str) -> Result<&NodeRecord> {
        self.require_index(id).map(|i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Undirected neighbor ids, sorted.
    pub fn neighbors(&self, id: &str) -> Result<Vec<&str>> {
        let idx = self.require_index(id)?;
        Ok(self
            .neighbor_indices(idx)
            .iter()
            .map(|&j| self.id(j as usize))
            .collect())
    }

    #[inline]
    pub fn neighbor_indices(&self, idx: usize) -> &[u32] {
        &self.targets[self.offsets[idx]..self.offsets[idx + 1]]
    }

    #[inline]
    pub fn degree(&self, idx: usize) -> usize {
        self.offsets[idx + 1] - self.offsets[idx]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let (small, other) = if self.degree(a) <= self.degree(b) {
            (a, b)
        } else {
            (b, a)
        };
        self.neighbor_indices(small)
            .binary_search(&(other as u32))
            .is_ok()
    }

    /// Edges in ingestion order.
    pub fn edges(&self) -> impl Iterator<Item = EdgeRef<'_>> + '_ {
        self.edges.iter().map(move |e| self.edge_ref(e))
    }

    /// Edge endpoints as node indices, in ingestion order.
    pub fn edge_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|e| (e.src as usize, e.dst as usize))
    }

    fn edge_ref(&self, e: &StoredEdge) -> EdgeRef<'_> {
        EdgeRef {
            src: &self.nodes[e.src as usize].id,
            dst: &self.nodes[e.dst as usize].id,
            relation: &self.relations[e.relation as usize],
        }
    }

    pub fn write_nodes_csv<W: Write>(&self, w: W) -> Result<()> {
        write_nodes_csv(w, &self.nodes)
    }

    pub fn write_edges_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(EDGES_HEADER)?;
        for e in self.edges() {
            out.write_record([e.src, e.dst, e.relation])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn write_nodes_csv<'a, W, I>(w: W, nodes: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a NodeRecord>,
{
    let mut out = csv::Writer::from_writer(w);
    out.write_record(NODES_HEADER)?;
    for n in nodes {
        out.write_record([
            n.id.as_str(),
            n.asset_type.name.as_str(),
            n.label.as_str(),
            n.meta_json().as_str(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Accumulates nodes and edges, then freezes them into a [`LineageGraph`].
#[derive(Debug)]
pub struct GraphBuilder {
    asset_types: AssetTypes,
    nodes: Vec<NodeRecord>,
    index: HashMap<String, u32>,
    relations: Vec<String>,
    relation_index: HashMap<String, u32>,
    edges: Vec<StoredEdge>,
    seen: HashSet<(u32, u32)>,
    duplicates: usize,
}

impl GraphBuilder {
    pub fn new(asset_types: AssetTypes) -> Self {
        Self {
            asset_types,
            nodes: Vec::new(),
            index: HashMap::new(),
            relations: Vec::new(),
            relation_index: HashMap::new(),
            edges: Vec::new(),
            seen: HashSet::new(),
            duplicates: 0,
        }
    }

    pub fn asset_types(&self) -> &AssetTypes {
        &self.asset_types
    }

    /// Adds a node by type name.
    pub fn node(
        &mut self,
        id: impl Into<String>,
        asset_type: &str,
        label: impl Into<String>,
        meta: BTreeMap<String, String>,
    ) -> Result<&mut Self> {
        let asset_type = self
            .asset_types
            .get(asset_type)
            .ok_or_else(|| Error::InvalidInput(format!("unknown asset type {asset_type:?}")))?
            .clone();
        self.add_node(NodeRecord {
            id: id.into(),
            asset_type,
            label: label.into(),
            meta,
        })?;
        Ok(self)
    }

    pub fn add_node(&mut self, node: NodeRecord) -> Result<()> {
        if node.id.is_empty() {
            return Err(Error::InvalidInput("empty node id".into()));
        }
        if self.asset_types.by_ordinal(node.asset_type.ordinal) != Some(&node.asset_type) {
            return Err(Error::InvalidInput(format!(
                "unknown asset type {:?}",
                node.asset_type.name
            )));
        }
        if self.index.contains_key(&node.id) {
            return Err(Error::InvalidInput(format!("duplicate node id {:?}", node.id)));
        }
        let idx = u32::try_from(self.nodes.len())
            .map_err(|_| Error::InvalidInput("too many nodes".into()))?;
        self.index.insert(node.id.clone(), idx);
        self.nodes.push(node);
        Ok(())
    }

    /// Returns `Ok(false)` when the undirected edge already exists.
    pub fn add_edge(&mut self, src: &str, dst: &str, relation: &str) -> Result<bool> {
        let s = *self
            .index
            .get(src)
            .ok_or_else(|| Error::InvalidInput(format!("edge references unknown node {src:?}")))?;
        let d = *self
            .index
            .get(dst)
            .ok_or_else(|| Error::InvalidInput(format!("edge references unknown node {dst:?}")))?;
        if s == d {
            return Err(Error::InvalidInput(format!("self-loop on {src:?}")));
        }
        if !self.seen.insert((s.min(d), s.max(d))) {
            self.duplicates += 1;
            return Ok(false);
        }
        let relation = match self.relation_index.get(relation) {
            Some(&r) => r,
            None => {
                let r = self.relations.len() as u32;
                self.relations.push(relation.to_owned());
                self.relation_index.insert(relation.to_owned(), r);
                r
            }
        };
        self.edges.push(StoredEdge {
            src: s,
            dst: d,
            relation,
        });
        Ok(true)
    }

    pub fn duplicate_edges(&self) -> usize {
        self.duplicates
    }

    pub fn build(self) -> LineageGraph {
        let n = self.nodes.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by(|&a, &b| self.nodes[a as usize].id.cmp(&self.nodes[b as usize].id));
        let mut remap = vec![0u32; n];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }

        let mut slots: Vec<Option<NodeRecord>> = self.nodes.into_iter().map(Some).collect();
        let nodes: Vec<NodeRecord> = order
            .iter()
            .map(|&old| slots[old as usize].take().expect("each node moved once"))
            .collect();
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, node)| (node.id.clone(), i as u32))
            .collect();

        let edges: Vec<StoredEdge> = self
            .edges
            .into_iter()
            .map(|e| StoredEdge {
                src: remap[e.src as usize],
                dst: remap[e.dst as usize],
                relation: e.relation,
            })
            .collect();

        let mut offsets = vec![0usize; n + 1];
        for e in &edges {
            offsets[e.src as usize + 1] += 1;
            offsets[e.dst as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; offsets[n]];
        for e in &edges {
            targets[cursor[e.src as usize]] = e.dst;
            cursor[e.src as usize] += 1;
            targets[cursor[e.dst as usize]] = e.src;
            cursor[e.dst as usize] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }

        LineageGraph {
            asset_types: self.asset_types,
            nodes,
            index,
            relations: self.relations,
            edges,
            offsets,
            targets,
        }
    }
}

fn check_header(
    reader: &mut csv::Reader<impl Read>,
    expected: &[&str],
    source_name: &'static str,
) -> Result<bool> {
    let header = reader.headers()?;
    if header.is_empty() || (header.len() == 1 && header.get(0) == Some("")) {
        return Ok(false);
    }
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Ingest {
            source_name,
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(true)
}

fn parse_meta(raw: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    if raw.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| format!("meta_json is not valid JSON: {e}"))?;
    let serde_json::Value::Object(map) = value else {
        return Err("meta_json must be a JSON object".into());
    };
    Ok(map
        .into_iter()
        .map(|(k, v)| {
            let v = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            (k, v)
        })
        .collect())
}

/// Reads the nodes and edges tables and validates them into a graph.
///
/// Duplicate undirected edges are merged and counted in the report. Unknown
/// endpoints, unknown asset types, self-loops and duplicate node ids are
/// rejected with the offending line number.
pub fn ingest_graph<N: Read, E: Read>(
    nodes_source: N,
    edges_source: E,
    asset_types: &AssetTypes,
) -> Result<(LineageGraph, IngestReport)> {
    let mut builder = GraphBuilder::new(asset_types.clone());

    let mut nodes = csv::ReaderBuilder::new().from_reader(nodes_source);
    if check_header(&mut nodes, &NODES_HEADER, NODES_FILE)? {
        let mut record = csv::StringRecord::new();
        loop {
            let line = nodes.position().line();
            if !nodes.read_record(&mut record).map_err(|e| Error::Ingest {
                source_name: NODES_FILE,
                line: e.position().map_or(line, |p| p.line()),
                message: e.to_string(),
            })? {
                break;
            }
            let line = record.position().map_or(line, |p| p.line());
            let fail = |message: String| Error::Ingest {
                source_name: NODES_FILE,
                line,
                message,
            };
            let type_name = &record[1];
            let asset_type = asset_types
                .get(type_name)
                .ok_or_else(|| fail(format!("unknown asset type {type_name:?}")))?
                .clone();
            let meta = parse_meta(&record[3]).map_err(fail)?;
            builder
                .add_node(NodeRecord {
                    id: record[0].to_owned(),
                    asset_type,
                    label: record[2].to_owned(),
                    meta,
                })
                .map_err(|e| fail(e.to_string()))?;
        }
    }

    let mut edges = csv::ReaderBuilder::new().from_reader(edges_source);
    if check_header(&mut edges, &EDGES_HEADER, EDGES_FILE)? {
        let mut record = csv::StringRecord::new();
        loop {
            let line = edges.position().line();
            if !edges.read_record(&mut record).map_err(|e| Error::Ingest {
                source_name: EDGES_FILE,
                line: e.position().map_or(line, |p| p.line()),
                message: e.to_string(),
            })? {
                break;
            }
            let line = record.position().map_or(line, |p| p.line());
            builder
                .add_edge(&record[0], &record[1], &record[2])
                .map_err(|e| Error::Ingest {
                    source_name: EDGES_FILE,
                    line,
                    message: e.to_string(),
                })?;
        }
    }

    let duplicate_edges = builder.duplicate_edges();
    let graph = builder.build();
    let report = IngestReport {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        duplicate_edges,
    };
    if duplicate_edges > 0 {
        log::warn!("merged {duplicate_edges} duplicate edge(s)");
    }
    log::info!("ingested {} nodes, {} edges", report.nodes, report.edges);
    Ok((graph, report))
}

/// Ingests `nodes.csv` and `edges.csv` from `dir`.
pub fn load_graph_dir(dir: &Path, asset_types: &AssetTypes) -> Result<(LineageGraph, IngestReport)> {
    let open = |name: &str| {
        let path = dir.join(name);
        File::open(&path).map(io::BufReader::new).map_err(|e| {
            Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })
    };
    ingest_graph(open(NODES_FILE)?, open(EDGES_FILE)?, asset_types)
}
