use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rekom_core::TrainConfig;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Parser)]
#[command(name = "rekom", version, about = "Link-prediction recommendations over a lineage graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic typed lineage graph (nodes.csv, edges.csv).
    Generate(GenerateArgs),
    /// Compute degree, centrality and community features (features.csv).
    Derive(DeriveArgs),
    /// Train the link predictor and project its embedding
    /// (embedding.bin, training_log.csv, projection.csv).
    Train(TrainArgs),
    /// Serve the recommendation API over trained artifacts.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// About two thousand nodes.
    Desk,
    /// 211,515 nodes, roughly half a million edges.
    Catalog,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory for nodes.csv and edges.csv.
    #[arg(long)]
    pub graph_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    /// Override a node count, e.g. `--count table=100`. Repeatable.
    #[arg(long = "count", value_name = "TYPE=N", value_parser = parse_count)]
    pub counts: Vec<(String, usize)>,
    /// Zero every node count not given with `--count`.
    #[arg(long)]
    pub only: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    /// Directory holding nodes.csv and edges.csv.
    #[arg(long)]
    pub graph_dir: PathBuf,
    /// Where to write features.csv; defaults to the graph directory.
    #[arg(long)]
    pub artifacts_dir: Option<PathBuf>,
    /// Seed of the community detection visiting order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding nodes.csv and edges.csv.
    #[arg(long)]
    pub graph_dir: PathBuf,
    /// Directory holding features.csv and receiving the trained artifacts;
    /// defaults to the graph directory.
    #[arg(long)]
    pub artifacts_dir: Option<PathBuf>,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().layers)]
    pub layers: usize,
    #[arg(long, default_value_t = TrainConfig::default().hidden_dim)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = TrainConfig::default().embed_dim)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = TrainConfig::default().negatives_per_positive)]
    pub negatives: usize,
    #[arg(long, default_value_t = TrainConfig::default().validation_fraction)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Projection method for projection.csv.
    #[arg(long, default_value = "pca")]
    pub projection: String,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            layers: self.layers,
            hidden_dim: self.hidden_dim,
            embed_dim: self.embed_dim,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            negatives_per_positive: self.negatives,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory holding features.csv, embedding.bin and projection.csv;
    /// annotations are journaled here too.
    #[arg(long)]
    pub artifacts_dir: PathBuf,
    /// Directory holding nodes.csv and edges.csv; defaults to the artifacts
    /// directory.
    #[arg(long)]
    pub graph_dir: Option<PathBuf>,
    #[arg(long, env = "REKOM_PORT", default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Static front-end files served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

fn parse_count(raw: &str) -> Result<(String, usize), String> {
    let (name, count) = raw
        .split_once('=')
        .ok_or_else(|| format!("expected TYPE=N, got {raw:?}"))?;
    let count = count
        .parse()
        .map_err(|e| format!("bad count in {raw:?}: {e}"))?;
    Ok((name.to_owned(), count))
}
