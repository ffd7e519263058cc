use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::LineageGraph;

/// Undirected degree per node, in graph index order.
pub fn compute_degree(graph: &LineageGraph) -> Vec<usize> {
    (0..graph.node_count()).map(|i| graph.degree(i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centrality {
    /// PageRank per node in graph index order; sums to 1.
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// `false` when `max_iter` was reached first; `scores` is then the last iterate.
    pub converged: bool,
}

/// PageRank over the undirected view with uniform teleport.
///
/// Isolated nodes spread their mass uniformly. Each node's update is a
/// sequential sum over its sorted neighbor list, so the parallel schedule
/// does not affect the result.
pub fn compute_centrality(graph: &LineageGraph, config: &PageRankConfig) -> Result<Centrality> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::InvalidInput("centrality of an empty graph".into()));
    }
    if !(0.0..=1.0).contains(&config.damping) {
        return Err(Error::InvalidInput(format!(
            "damping {} outside [0, 1]",
            config.damping
        )));
    }
    let d = config.damping;
    let nf = n as f64;
    let inv_degree: Vec<f64> = (0..n)
        .map(|i| match graph.degree(i) {
            0 => 0.0,
            k => 1.0 / k as f64,
        })
        .collect();

    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut share = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iter {
        iterations += 1;
        let mut dangling = 0.0;
        for i in 0..n {
            share[i] = rank[i] * inv_degree[i];
            if inv_degree[i] == 0.0 {
                dangling += rank[i];
            }
        }
        let base = (1.0 - d) / nf + d * dangling / nf;
        next.par_iter_mut().enumerate().for_each(|(v, slot)| {
            let pulled: f64 = graph
                .neighbor_indices(v)
                .iter()
                .map(|&u| share[u as usize])
                .sum();
            *slot = base + d * pulled;
        });
        let delta: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < config.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("pagerank did not converge within {} iterations", config.max_iter);
    }

    let total: f64 = rank.iter().sum();
    rank.iter_mut().for_each(|r| *r /= total);
    Ok(Centrality {
        scores: rank,
        iterations,
        converged,
    })
}
