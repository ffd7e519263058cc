//! Small hand-built graphs shared by tests, benchmarks and examples.

use std::collections::BTreeMap;

use crate::graph::{AssetTypes, GraphBuilder, LineageGraph};

/// Builds a graph whose nodes are all tables, with `lineage` edges.
pub fn graph_from_edges(ids: &[&str], edges: &[(&str, &str)]) -> LineageGraph {
    typed_graph(&ids.iter().map(|&id| (id, "table")).collect::<Vec<_>>(), edges)
}

/// Builds a graph from `(id, asset_type)` pairs and undirected edges.
pub fn typed_graph(nodes: &[(&str, &str)], edges: &[(&str, &str)]) -> LineageGraph {
    let mut b = GraphBuilder::new(AssetTypes::default());
    for &(id, ty) in nodes {
        b.node(id, ty, id, BTreeMap::new()).expect("valid fixture node");
    }
    for &(s, d) in edges {
        b.add_edge(s, d, "lineage").expect("valid fixture edge");
    }
    b.build()
}

/// Every pair of `ids`.
pub fn clique_edges<'a>(ids: &[&'a str]) -> Vec<(&'a str, &'a str)> {
    let mut out = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

/// Triangles {a,b,c} and {d,e,f} joined by the bridge c–d.
pub fn two_triangles() -> LineageGraph {
    graph_from_edges(
        &["a", "b", "c", "d", "e", "f"],
        &[
            ("a", "b"),
            ("b", "c"),
            ("a", "c"),
            ("d", "e"),
            ("e", "f"),
            ("d", "f"),
            ("c", "d"),
        ],
    )
}

/// Two disjoint 5-cliques: tables `t0..t4` and workbooks `w0..w4`.
///
/// The cliques carry different asset types; with identical types the two
/// halves would be automorphic and no encoder could tell within-clique pairs
/// from cross-clique pairs.
pub fn two_cliques() -> LineageGraph {
    let tables = ["t0", "t1", "t2", "t3", "t4"];
    let books = ["w0", "w1", "w2", "w3", "w4"];
    let mut nodes: Vec<(&str, &str)> = tables.iter().map(|&t| (t, "table")).collect();
    nodes.extend(books.iter().map(|&w| (w, "workbook")));
    let mut edges = clique_edges(&tables);
    edges.extend(clique_edges(&books));
    typed_graph(&nodes, &edges)
}
