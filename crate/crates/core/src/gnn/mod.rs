//! Link-prediction model: training, embedding export and pair scoring.

mod embedding;
mod metrics;
mod model;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use embedding::{score_all, score_pair, EmbeddingMatrix, LinkScore, EMBEDDING_FILE};
pub(crate) use embedding::ranking_order;
pub use metrics::{auc_from_scores, evaluate_auc};
pub use model::{Adjacency, Encoder, LabelledPair};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::LineageGraph;
use crate::linalg::Matrix;

pub const TRAINING_LOG_FILE: &str = "training_log.csv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives_per_positive: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden_dim: 64,
            embed_dim: 32,
            epochs: 200,
            learning_rate: 0.01,
            negatives_per_positive: 5,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(m.to_owned()));
        if self.layers < 1 {
            return fail("layers must be at least 1");
        }
        if self.embed_dim < 2 {
            return fail("embed_dim must be at least 2");
        }
        if self.hidden_dim < 1 {
            return fail("hidden_dim must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return fail("validation_fraction must lie in (0, 0.5)");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if self.negatives_per_positive < 1 {
            return fail("negatives_per_positive must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when the validation split is empty.
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn final_val_auc(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.val_auc)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "train_loss", "val_auc"])?;
        for e in &self.epochs {
            out.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_auc.map(|a| a.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub embedding: EmbeddingMatrix,
    pub log: TrainingLog,
    pub encoder: Encoder,
    /// Held-out edges, as node index pairs.
    pub validation_edges: Vec<(usize, usize)>,
    pub validation_negatives: Vec<(usize, usize)>,
}

/// Draws up to `count` node pairs that are not adjacent in `graph`, uniformly
/// over ordered pairs of distinct nodes. Returns fewer only when the graph has
/// almost no non-edges.
pub fn sample_non_edges<R: Rng>(
    graph: &LineageGraph,
    count: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let n = graph.node_count();
    let pairs = n.saturating_mul(n.saturating_sub(1)) / 2;
    if count == 0 || pairs <= graph.edge_count() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(count);
    let budget = count.saturating_mul(100).saturating_add(1000);
    for _ in 0..budget {
        if out.len() == count {
            break;
        }
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n - 1);
        let v = if v >= u { v + 1 } else { v };
        if !graph.has_edge(u, v) {
            out.push((u, v));
        }
    }
    out
}

/// Trains the encoder on `graph` and returns the embedding of every node.
///
/// A `validation_fraction` share of edges is held out of message passing
/// and of the loss; each epoch draws fresh uniform negatives. The final
/// embedding is a forward pass over the full graph. Deterministic in
/// `config.seed`.
pub fn train(
    graph: &LineageGraph,
    features: &FeatureMatrix,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let n = graph.node_count();
    if features.values.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "feature matrix has {} rows, graph has {n} nodes",
            features.values.rows()
        )));
    }
    if let Some(i) = (0..n).find(|&i| features.ids[i] != graph.id(i)) {
        return Err(Error::DimensionMismatch(format!(
            "feature row {i} is {:?}, graph expects {:?}",
            features.ids[i],
            graph.id(i)
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("cannot train on an empty graph".into()));
    }
    let x = &features.values;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut encoder = Encoder::init(
        x.cols(),
        config.hidden_dim,
        config.embed_dim,
        config.layers,
        &mut rng,
    );

    let mut edges: Vec<(usize, usize)> = graph.edge_indices().collect();
    edges.shuffle(&mut rng);
    let held_out = ((edges.len() as f64 * config.validation_fraction).round() as usize)
        .min(edges.len().saturating_sub(1));
    let validation_edges: Vec<(usize, usize)> = edges[..held_out].to_vec();
    let train_edges: Vec<(usize, usize)> = edges[held_out..].to_vec();
    let train_adj = Adjacency::from_edges(n, &train_edges);
    let validation_negatives =
        sample_non_edges(graph, held_out * config.negatives_per_positive, &mut rng);

    let mut log = TrainingLog::default();
    let mut pairs = Vec::new();
    for epoch in 1..=config.epochs {
        pairs.clear();
        pairs.extend(train_edges.iter().map(|&(u, v)| LabelledPair { u, v, label: 1.0 }));
        let negatives =
            sample_non_edges(graph, train_edges.len() * config.negatives_per_positive, &mut rng);
        pairs.extend(negatives.iter().map(|&(u, v)| LabelledPair { u, v, label: 0.0 }));

        let (loss, grads) = encoder.loss_and_gradients(&train_adj, x, &pairs);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        for (w, g) in encoder.weights.iter_mut().zip(&grads) {
            for (wi, gi) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *wi -= config.learning_rate * gi;
            }
        }
        if !encoder.weights.iter().all(Matrix::is_finite) {
            return Err(Error::NonFiniteLoss { epoch });
        }

        let val_auc = if validation_edges.is_empty() || validation_negatives.is_empty() {
            None
        } else {
            let z = encoder.forward(&train_adj, x);
            if !z.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            Some(pair_auc(&z, &validation_edges, &validation_negatives)?)
        };
        log::debug!("epoch {epoch}: loss {loss:.6} val_auc {val_auc:?}");
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_auc,
        });
    }

    let z = encoder.forward(&Adjacency::from_graph(graph), x);
    if !z.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: config.epochs,
        });
    }
    let embedding = EmbeddingMatrix::new(z, features.ids.clone())?;
    Ok(TrainOutcome {
        embedding,
        log,
        encoder,
        validation_edges,
        validation_negatives,
    })
}

fn pair_auc(z: &Matrix, positives: &[(usize, usize)], negatives: &[(usize, usize)]) -> Result<f64> {
    // Sigmoid is monotone, so raw dot products rank identically.
    let score = |&(u, v): &(usize, usize)| crate::linalg::dot(z.row(u), z.row(v));
    let pos: Vec<f64> = positives.iter().map(score).collect();
    let neg: Vec<f64> = negatives.iter().map(score).collect();
    auc_from_scores(&pos, &neg)
}
