//! Independent oracles shared by the integration tests and the acceptance
//! suite. Everything here is deliberately brute force.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rekom_core::features::{build_feature_matrix, derive_features, DeriveConfig};
use rekom_core::fixtures::{graph_from_edges, typed_graph};
use rekom_core::gnn::{Adjacency, Encoder, LabelledPair};
use rekom_core::linalg::Matrix;
use rekom_core::LineageGraph;

/// All-pairs hop counts by Floyd–Warshall over the undirected edge list;
/// `None` marks unreachable pairs.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<u32>>> {
    const INF: u32 = u32::MAX / 2;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d.into_iter()
        .map(|row| row.into_iter().map(|v| (v < INF).then_some(v)).collect())
        .collect()
}

/// A random simple graph on `n` nodes named `v0..`, each pair linked with
/// probability `p`. Returns the graph and its edges as index pairs in the
/// graph's (id-sorted) index space.
pub fn random_graph(n: usize, p: f64, seed: u64) -> (LineageGraph, Vec<(usize, usize)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                pairs.push((i, j));
            }
        }
    }
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let edge_refs: Vec<(&str, &str)> = pairs.iter().map(|&(a, b)| (id_refs[a], id_refs[b])).collect();
    let g = graph_from_edges(&id_refs, &edge_refs);
    let edges = pairs
        .iter()
        .map(|&(a, b)| (g.index_of(id_refs[a]).unwrap(), g.index_of(id_refs[b]).unwrap()))
        .collect();
    (g, edges)
}

/// Every set partition of `0..n` as a block label per element, blocks
/// numbered by first appearance (restricted growth strings).
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for label in 0..=next {
            prefix.push(label);
            extend(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), n, &mut out);
    out
}

/// Newman modularity of a partition of an undirected, unweighted graph.
pub fn modularity(n: usize, edges: &[(usize, usize)], labels: &[usize]) -> f64 {
    let m = edges.len() as f64;
    let mut degree = vec![0.0; n];
    for &(a, b) in edges {
        degree[a] += 1.0;
        degree[b] += 1.0;
    }
    let blocks = labels.iter().max().map_or(0, |m| m + 1);
    let mut inside = vec![0.0; blocks];
    let mut total = vec![0.0; blocks];
    for &(a, b) in edges {
        if labels[a] == labels[b] {
            inside[labels[a]] += 1.0;
        }
    }
    for v in 0..n {
        total[labels[v]] += degree[v];
    }
    (0..blocks)
        .map(|c| inside[c] / m - (total[c] / (2.0 * m)).powi(2))
        .sum()
}

/// Relabels blocks by first appearance so equal partitions compare equal.
pub fn canonical<T: Copy + PartialEq>(labels: &[T]) -> Vec<usize> {
    let mut seen: Vec<T> = Vec::new();
    labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(i) => i,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &order[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// A 6-node typed graph with its features, all of its edges as positives
/// and four non-edges as negatives.
pub struct GradientFixture {
    pub adj: Adjacency,
    pub x: Matrix,
    pub pairs: Vec<LabelledPair>,
}

pub fn gradient_fixture() -> GradientFixture {
    let g = typed_graph(
        &[
            ("a", "user"),
            ("b", "workbook"),
            ("c", "table"),
            ("d", "database"),
            ("e", "workflow"),
            ("f", "table"),
        ],
        &[("a", "b"), ("b", "e"), ("e", "c"), ("c", "d"), ("d", "f"), ("a", "c")],
    );
    let f = derive_features(&g, &DeriveConfig::default()).unwrap();
    let x = build_feature_matrix(&g, &f).unwrap().values;
    let pairs = g
        .edge_indices()
        .map(|(u, v)| LabelledPair { u, v, label: 1.0 })
        .chain([(0, 3), (1, 5), (2, 4), (0, 5)].map(|(u, v)| LabelledPair { u, v, label: 0.0 }))
        .collect();
    GradientFixture {
        adj: Adjacency::from_graph(&g),
        x,
        pairs,
    }
}

/// Central finite differences of the loss against every weight entry; the
/// worst relative error, with magnitudes below 1e-6 treated as 1e-6.
pub fn max_relative_gradient_error(
    encoder: &Encoder,
    adj: &Adjacency,
    x: &Matrix,
    pairs: &[LabelledPair],
    eps: f64,
) -> f64 {
    let (_, analytic) = encoder.loss_and_gradients(adj, x, pairs);
    let mut worst: f64 = 0.0;
    for (l, grad) in analytic.iter().enumerate() {
        for k in 0..grad.as_slice().len() {
            let mut plus = encoder.clone();
            plus.weights[l].as_mut_slice()[k] += eps;
            let mut minus = encoder.clone();
            minus.weights[l].as_mut_slice()[k] -= eps;
            let numeric = (plus.loss(adj, x, pairs) - minus.loss(adj, x, pairs)) / (2.0 * eps);
            let a = grad.as_slice()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Encoders with 3 layers (hidden 5, output 2) for the given seeds.
pub fn gradient_check_encoders(x: &Matrix, seeds: std::ops::Range<u64>) -> Vec<Encoder> {
    seeds
        .map(|seed| Encoder::init(x.cols(), 5, 3, 2, &mut ChaCha8Rng::seed_from_u64(seed)))
        .collect()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Squared singular values of the centred matrix, largest first, as shares of
/// their total.
pub fn svd_explained_variance(x: &Matrix) -> Vec<f64> {
    let (n, m) = (x.rows(), x.cols());
    let mut dm = DMatrix::from_row_slice(n, m, x.as_slice());
    let means: Vec<f64> = (0..m).map(|c| dm.column(c).mean()).collect();
    for c in 0..m {
        for r in 0..n {
            dm[(r, c)] -= means[c];
        }
    }
    let mut s2: Vec<f64> = dm.svd(false, false).singular_values.iter().map(|s| s * s).collect();
    s2.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = s2.iter().sum();
    s2.iter().map(|v| v / total).collect()
}

pub fn pairwise_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
