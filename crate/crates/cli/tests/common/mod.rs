#![allow(dead_code)]

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use clap::Parser;
use rekom_cli::{run, Cli, CliError};
use rekom_core::graph::{EDGES_FILE, NODES_FILE};
use rekom_core::LineageGraph;

/// Parses and runs a command line, returning its printed summary.
pub fn rekom(args: &[&str]) -> Result<String, CliError> {
    let cli = Cli::try_parse_from(std::iter::once("rekom").chain(args.iter().copied()))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = Vec::new();
    run(&cli, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

pub fn write_graph(graph: &LineageGraph, dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    graph
        .write_nodes_csv(BufWriter::new(File::create(dir.join(NODES_FILE)).unwrap()))
        .unwrap();
    graph
        .write_edges_csv(BufWriter::new(File::create(dir.join(EDGES_FILE)).unwrap()))
        .unwrap();
}

/// Writes `graph`, derives its features and trains for `epochs`, all in `dir`.
pub fn pipeline(graph: &LineageGraph, dir: &Path, epochs: usize) -> String {
    write_graph(graph, dir);
    let d = dir.to_str().unwrap();
    rekom(&["derive", "--graph-dir", d]).unwrap();
    rekom(&["train", "--graph-dir", d, "--epochs", &epochs.to_string(), "--seed", "7"]).unwrap()
}

/// The AUC printed by `train`.
pub fn printed_auc(summary: &str) -> Option<f64> {
    summary
        .lines()
        .find_map(|l| l.strip_prefix("final validation AUC: "))
        .and_then(|v| v.parse().ok())
}
