use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::RecommendationRow;
use crate::error::{Error, Result};
use crate::gnn::ranking_order;

/// Equal-width probability bins over [0, 1] and a per-bin draw size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleSpec {
    bins: usize,
    per_bin: usize,
    seed: u64,
}

impl Default for SampleSpec {
    /// Ten bins of up to fifty rows: at most 500 points per view.
    fn default() -> Self {
        Self {
            bins: 10,
            per_bin: 50,
            seed: 0,
        }
    }
}

impl SampleSpec {
    pub fn new(bins: usize, per_bin: usize, seed: u64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidInput("bins must be at least 1".into()));
        }
        if per_bin == 0 {
            return Err(Error::InvalidInput("per_bin must be at least 1".into()));
        }
        Ok(Self { bins, per_bin, seed })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn per_bin(&self) -> usize {
        self.per_bin
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Bin of a probability; 1.0 falls in the last bin.
    pub fn bin_of(&self, probability: f64) -> usize {
        let p = probability.clamp(0.0, 1.0);
        ((p * self.bins as f64).floor() as usize).min(self.bins - 1)
    }
}

/// Draws up to `per_bin` rows without replacement from every non-empty bin,
/// visiting bins in ascending order with one seeded generator. The result is
/// ranked by descending probability, ties by destination id.
pub fn stratified_sample(rows: &[RecommendationRow], spec: &SampleSpec) -> Vec<RecommendationRow> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); spec.bins];
    for (i, row) in rows.iter().enumerate() {
        members[spec.bin_of(row.probability)].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked: Vec<&RecommendationRow> = Vec::new();
    for bin in &members {
        if bin.len() <= spec.per_bin {
            picked.extend(bin.iter().map(|&i| &rows[i]));
        } else {
            let chosen = index::sample(&mut rng, bin.len(), spec.per_bin);
            picked.extend(chosen.iter().map(|k| &rows[bin[k]]));
        }
    }
    picked.sort_by(|a, b| {
        ranking_order((a.probability, &a.destination), (b.probability, &b.destination))
    });
    picked.into_iter().cloned().collect()
}
