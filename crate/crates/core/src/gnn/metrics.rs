use crate::error::{Error, Result};
use crate::gnn::EmbeddingMatrix;

/// ROC AUC as the Mann–Whitney rank statistic; tied scores count one half.
pub fn auc_from_scores(positive: &[f64], negative: &[f64]) -> Result<f64> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::InvalidInput(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    let mut all: Vec<(f64, bool)> = positive
        .iter()
        .map(|&s| (s, true))
        .chain(negative.iter().map(|&s| (s, false)))
        .collect();
    if all.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidInput("AUC over NaN scores".into()));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of 1-based ranks of the positives, ties sharing their average rank.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = all[i..=j].iter().filter(|(_, p)| *p).count();
        rank_sum += avg_rank * pos_in_group as f64;
        i = j + 1;
    }
    let p = positive.len() as f64;
    let n = negative.len() as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// AUC of the embedding's link probabilities, positives against negatives.
pub fn evaluate_auc<S: AsRef<str>>(
    embedding: &EmbeddingMatrix,
    positive_edges: &[(S, S)],
    negative_pairs: &[(S, S)],
) -> Result<f64> {
    let score = |pairs: &[(S, S)]| -> Result<Vec<f64>> {
        pairs
            .iter()
            .map(|(u, v)| {
                Ok(embedding.probability(embedding.row_of(u.as_ref())?, embedding.row_of(v.as_ref())?))
            })
            .collect()
    };
    auc_from_scores(&score(positive_edges)?, &score(negative_pairs)?)
}
