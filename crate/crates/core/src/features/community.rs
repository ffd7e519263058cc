use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::graph::LineageGraph;

pub const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Communities {
    /// Label per node in graph index order, compacted to `0..count`.
    pub labels: Vec<u32>,
    pub count: usize,
    pub sweeps: usize,
    pub converged: bool,
}

impl Communities {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

/// Weight of each adjacency slot: 1 plus the number of triangles the edge
/// closes. Aligned with the CSR neighbor lists.
fn triangle_weights(graph: &LineageGraph) -> Vec<Vec<u32>> {
    (0..graph.node_count())
        .into_par_iter()
        .map(|u| {
            let nu = graph.neighbor_indices(u);
            nu.iter()
                .map(|&v| {
                    let nv = graph.neighbor_indices(v as usize);
                    let (small, large) = if nu.len() <= nv.len() { (nu, nv) } else { (nv, nu) };
                    let common = small
                        .iter()
                        .filter(|x| large.binary_search(x).is_ok())
                        .count();
                    1 + common as u32
                })
                .collect()
        })
        .collect()
}

/// Asynchronous label propagation.
///
/// Nodes are visited in id order permuted by a seeded shuffle; each adopts
/// the label with the largest summed edge weight among its neighbors, the
/// lowest label winning ties. Edge weights count shared neighbors, so
/// triangle-dense groups hold together against single bridges. Stops at a
/// fixed point or after [`MAX_SWEEPS`]. Labels are compacted in order of
/// first appearance by node id.
pub fn compute_communities(graph: &LineageGraph, seed: u64) -> Communities {
    let n = graph.node_count();
    if n == 0 {
        return Communities {
            labels: Vec::new(),
            count: 0,
            sweeps: 0,
            converged: true,
        };
    }
    let weights = triangle_weights(graph);
    let mut labels: Vec<u32> = (0..n as u32).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut tally = vec![0u64; n];
    let mut touched: Vec<u32> = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut changed = false;
        for &v in &order {
            let neighbors = graph.neighbor_indices(v);
            if neighbors.is_empty() {
                continue;
            }
            for (&u, &w) in neighbors.iter().zip(&weights[v]) {
                let l = labels[u as usize];
                if tally[l as usize] == 0 {
                    touched.push(l);
                }
                tally[l as usize] += u64::from(w);
            }
            let mut best = u32::MAX;
            let mut best_weight = 0;
            for &l in &touched {
                let w = tally[l as usize];
                if w > best_weight || (w == best_weight && l < best) {
                    best = l;
                    best_weight = w;
                }
                tally[l as usize] = 0;
            }
            touched.clear();
            if labels[v] != best {
                labels[v] = best;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("label propagation stopped after {MAX_SWEEPS} sweeps without a fixed point");
    }

    let mut compact = vec![u32::MAX; n];
    let mut count = 0u32;
    for l in labels.iter_mut() {
        let slot = &mut compact[*l as usize];
        if *slot == u32::MAX {
            *slot = count;
            count += 1;
        }
        *l = *slot;
    }
    Communities {
        labels,
        count: count as usize,
        sweeps,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{clique_edges, graph_from_edges};

    #[test]
    fn empty_graph() {
        let g = graph_from_edges(&[], &[]);
        let c = compute_communities(&g, 1);
        assert!(c.labels.is_empty());
        assert_eq!(c.count, 0);
    }

    #[test]
    fn clique_is_one_community() {
        let ids = ["a", "b", "c", "d", "e"];
        let g = graph_from_edges(&ids, &clique_edges(&ids));
        for seed in 0..20 {
            let c = compute_communities(&g, seed);
            assert_eq!(c.count, 1);
            assert!(c.labels.iter().all(|&l| l == 0));
            assert!(c.converged);
        }
    }

    #[test]
    fn isolated_nodes_keep_their_own_label() {
        let g = graph_from_edges(&["a", "b", "c", "d"], &[("a", "b")]);
        let c = compute_communities(&g, 3);
        assert_eq!(c.labels, vec![0, 0, 1, 2]);
        assert_eq!(c.sizes(), vec![2, 1, 1]);
    }

    #[test]
    fn labels_are_contiguous() {
        let g = graph_from_edges(
            &["a", "b", "c", "d", "e", "f", "g"],
            &[("a", "b"), ("c", "d"), ("d", "e"), ("f", "g")],
        );
        let c = compute_communities(&g, 9);
        let max = *c.labels.iter().max().unwrap() as usize;
        assert_eq!(max + 1, c.count);
        for l in 0..c.count as u32 {
            assert!(c.labels.contains(&l));
        }
    }
}
