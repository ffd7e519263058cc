use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rekom_core::features::{build_feature_matrix, derive_features, DeriveConfig, FEATURES_FILE};
use rekom_core::gnn::{train, TrainingLog, EMBEDDING_FILE, TRAINING_LOG_FILE};
use rekom_core::graph::{load_graph_dir, EDGES_FILE, NODES_FILE};
use rekom_core::projection::{project, PROJECTION_FILE};
use rekom_core::synth::{generate, SynthConfig};
use rekom_core::{AssetTypes, FeatureTable, LineageGraph, ProjectionMethod};

use crate::args::{DeriveArgs, GenerateArgs, Preset, TrainArgs};
use crate::error::CliError;

pub fn synth_config(args: &GenerateArgs) -> SynthConfig {
    let mut config = match args.preset {
        Preset::Desk => SynthConfig::default(),
        Preset::Catalog => SynthConfig::catalog_scale(),
    };
    if args.only {
        config.counts.values_mut().for_each(|c| *c = 0);
    }
    for (name, count) in &args.counts {
        config.counts.insert(name.clone(), *count);
    }
    config.seed = args.seed;
    config
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let types = AssetTypes::default();
    let config = synth_config(args);
    let graph = generate(&config, &types)?;
    graph
        .write_dir(&args.graph_dir)
        .map_err(|e| CliError::file(&args.graph_dir, e))?;
    writeln!(
        out,
        "wrote {} nodes and {} edges to {}",
        graph.nodes.len(),
        graph.edges.len(),
        args.graph_dir.display()
    )?;
    for (name, count) in graph.node_summary() {
        writeln!(out, "  {name:<16} {count:>8} nodes")?;
    }
    for (relation, count) in graph.edge_summary() {
        writeln!(out, "  {relation:<16} {count:>8} edges")?;
    }
    Ok(())
}

/// Ingests `nodes.csv` and `edges.csv`, failing with the missing file's name.
pub fn load_graph(dir: &Path) -> Result<LineageGraph, CliError> {
    for name in [NODES_FILE, EDGES_FILE] {
        require(dir, name)?;
    }
    let (graph, _) = load_graph_dir(dir, &AssetTypes::default()).map_err(|e| CliError::file(dir, e))?;
    Ok(graph)
}

pub(crate) fn require(dir: &Path, name: &'static str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact {
            name,
            dir: dir.to_path_buf(),
        })
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::file(path, e))
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> rekom_core::Result<()>,
) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::file(path, e))?);
    write(&mut w).map_err(|e| CliError::file(path, e))?;
    w.flush().map_err(|e| CliError::file(path, e))?;
    Ok(())
}

pub fn read_features(dir: &Path, graph: &LineageGraph) -> Result<FeatureTable, CliError> {
    let path = require(dir, FEATURES_FILE)?;
    FeatureTable::read_csv(open(&path)?, graph.asset_types()).map_err(|e| CliError::file(&path, e))
}

pub fn cmd_derive(args: &DeriveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let graph = load_graph(&args.graph_dir)?;
    let config = DeriveConfig {
        community_seed: args.seed,
        ..DeriveConfig::default()
    };
    let features = derive_features(&graph, &config)?;
    let dir = args.artifacts_dir.as_deref().unwrap_or(&args.graph_dir);
    fs::create_dir_all(dir)?;
    let path = dir.join(FEATURES_FILE);
    write_file(&path, |w| features.write_csv(w))?;
    writeln!(
        out,
        "wrote {} feature rows ({} communities) to {}",
        features.len(),
        features.community_count(),
        path.display()
    )?;
    Ok(())
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let method: ProjectionMethod = args
        .projection
        .parse()
        .map_err(|e: rekom_core::Error| CliError::Usage(e.to_string()))?;
    let config = args.config();
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let graph = load_graph(&args.graph_dir)?;
    let dir = args.artifacts_dir.as_deref().unwrap_or(&args.graph_dir);
    let features = read_features(dir, &graph)?;
    let matrix = build_feature_matrix(&graph, &features)?;
    let outcome = train(&graph, &matrix, &config)?;
    let projection = project(&outcome.embedding, method)?;

    write_file(&dir.join(EMBEDDING_FILE), |w| outcome.embedding.write_to(w))?;
    write_file(&dir.join(TRAINING_LOG_FILE), |w| outcome.log.write_csv(w))?;
    write_file(&dir.join(PROJECTION_FILE), |w| projection.write_csv(w))?;

    writeln!(
        out,
        "trained {} epochs on {} nodes; wrote {}, {}, {} to {}",
        outcome.log.epochs.len(),
        graph.node_count(),
        EMBEDDING_FILE,
        TRAINING_LOG_FILE,
        PROJECTION_FILE,
        dir.display()
    )?;
    writeln!(out, "{}", auc_line(&outcome.log))?;
    Ok(())
}

fn auc_line(log: &TrainingLog) -> String {
    match log.final_val_auc() {
        Some(auc) => format!("final validation AUC: {auc:.4}"),
        None => "final validation AUC: n/a (no epochs run)".to_owned(),
    }
}
