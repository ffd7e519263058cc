//! Mean-aggregation message-passing encoder with a dot-product decoder.
//!
//! Layer `l` maps `h` to `W_l · [h ‖ mean_{u ∈ N(v)} h_u]`, followed by ReLU on
//! every layer but the last. The decoder scores a pair as `sigmoid(z_u · z_v)`.
//! Gradients are derived by hand and accumulated sequentially.

use rand::Rng;

use crate::graph::LineageGraph;
use crate::linalg::{dot, sigmoid, softplus, Matrix};

/// Scale applied to the output layer's initial weights. Centrality features of
/// hub nodes run into the tens, so full-size output weights start the decoder
/// deep in saturation and the first descent steps kill most ReLUs; near-zero
/// initial logits avoid that.
pub const OUTPUT_INIT_GAIN: f64 = 0.03;

/// Undirected CSR adjacency over node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(a, b) in edges {
            offsets[a + 1] += 1;
            offsets[b + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; offsets[n]];
        for &(a, b) in edges {
            targets[cursor[a]] = b as u32;
            cursor[a] += 1;
            targets[cursor[b]] = a as u32;
            cursor[b] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Self { offsets, targets }
    }

    pub fn from_graph(graph: &LineageGraph) -> Self {
        let edges: Vec<(usize, usize)> = graph.edge_indices().collect();
        Self::from_edges(graph.node_count(), &edges)
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// `[h ‖ mean of neighbor rows]`; isolated nodes get a zero neighbor half.
fn concat_with_neighbor_mean(adj: &Adjacency, h: &Matrix) -> Matrix {
    let d = h.cols();
    let mut out = Matrix::zeros(h.rows(), 2 * d);
    for v in 0..h.rows() {
        let row = out.row_mut(v);
        row[..d].copy_from_slice(h.row(v));
        let neighbors = adj.neighbors(v);
        if neighbors.is_empty() {
            continue;
        }
        let agg = &mut row[d..];
        for &u in neighbors {
            for (a, &x) in agg.iter_mut().zip(h.row(u as usize)) {
                *a += x;
            }
        }
        let inv = 1.0 / neighbors.len() as f64;
        agg.iter_mut().for_each(|a| *a *= inv);
    }
    out
}

struct LayerCache {
    input: Matrix,
    pre: Matrix,
}

/// A labelled node pair for the link loss: 1.0 for an edge, 0.0 for a non-edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelledPair {
    pub u: usize,
    pub v: usize,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    /// One `out × 2·in` matrix per layer.
    pub weights: Vec<Matrix>,
}

impl Encoder {
    /// Glorot-uniform initialisation, with the output layer scaled down by
    /// [`OUTPUT_INIT_GAIN`].
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden_dim: usize,
        embed_dim: usize,
        layers: usize,
        rng: &mut R,
    ) -> Self {
        let mut weights = Vec::with_capacity(layers);
        let mut fan_in = input_dim;
        for l in 0..layers {
            let out = if l + 1 == layers { embed_dim } else { hidden_dim };
            let mut limit = (6.0 / (2 * fan_in + out) as f64).sqrt();
            if l + 1 == layers {
                limit *= OUTPUT_INIT_GAIN;
            }
            let data = (0..out * 2 * fan_in)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            weights.push(Matrix::from_vec(out, 2 * fan_in, data));
            fan_in = out;
        }
        Self { weights }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.first().map_or(0, |w| w.cols() / 2)
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map_or(0, Matrix::rows)
    }

    pub fn forward(&self, adj: &Adjacency, features: &Matrix) -> Matrix {
        self.forward_cached(adj, features).0
    }

    fn forward_cached(&self, adj: &Adjacency, features: &Matrix) -> (Matrix, Vec<LayerCache>) {
        let last = self.weights.len() - 1;
        let mut h = features.clone();
        let mut caches = Vec::with_capacity(self.weights.len());
        for (l, w) in self.weights.iter().enumerate() {
            let input = concat_with_neighbor_mean(adj, &h);
            let pre = input.matmul_transposed(w);
            h = pre.clone();
            if l != last {
                h.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
            }
            caches.push(LayerCache { input, pre });
        }
        (h, caches)
    }

    /// Class-balanced binary cross-entropy over `pairs` with its gradient per
    /// weight matrix.
    ///
    /// The loss is the mean over positive pairs plus the mean over negative
    /// pairs, so the negative sampling ratio does not drown out the positives.
    pub fn loss_and_gradients(
        &self,
        adj: &Adjacency,
        features: &Matrix,
        pairs: &[LabelledPair],
    ) -> (f64, Vec<Matrix>) {
        let (z, caches) = self.forward_cached(adj, features);
        let mut dz = Matrix::zeros(z.rows(), z.cols());
        let weights = class_weights(pairs);
        let mut loss = 0.0;
        for p in pairs {
            let s = dot(z.row(p.u), z.row(p.v));
            let w = weights.of(p.label);
            loss += w * (softplus(s) - p.label * s);
            let g = (sigmoid(s) - p.label) * w;
            for c in 0..z.cols() {
                let (zu, zv) = (z.get(p.u, c), z.get(p.v, c));
                dz.row_mut(p.u)[c] += g * zv;
                dz.row_mut(p.v)[c] += g * zu;
            }
        }

        let last = self.weights.len() - 1;
        let mut grads = vec![Matrix::zeros(0, 0); self.weights.len()];
        let mut upstream = dz;
        for l in (0..self.weights.len()).rev() {
            let cache = &caches[l];
            if l != last {
                for (g, &pre) in upstream.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
                    if pre <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            grads[l] = upstream.transpose_matmul(&cache.input);
            if l == 0 {
                break;
            }
            let d_input = upstream.matmul(&self.weights[l]);
            let d = d_input.cols() / 2;
            let mut d_h = Matrix::zeros(d_input.rows(), d);
            for v in 0..d_input.rows() {
                let row = d_input.row(v);
                for (slot, &x) in d_h.row_mut(v).iter_mut().zip(&row[..d]) {
                    *slot += x;
                }
                let neighbors = adj.neighbors(v);
                if neighbors.is_empty() {
                    continue;
                }
                let inv = 1.0 / neighbors.len() as f64;
                for &u in neighbors {
                    for (slot, &x) in d_h.row_mut(u as usize).iter_mut().zip(&row[d..]) {
                        *slot += x * inv;
                    }
                }
            }
            upstream = d_h;
        }
        (loss, grads)
    }

    pub fn loss(&self, adj: &Adjacency, features: &Matrix, pairs: &[LabelledPair]) -> f64 {
        let z = self.forward(adj, features);
        let weights = class_weights(pairs);
        pairs
            .iter()
            .map(|p| {
                let s = dot(z.row(p.u), z.row(p.v));
                weights.of(p.label) * (softplus(s) - p.label * s)
            })
            .sum()
    }
}

/// Per-pair weights that turn a plain sum into the sum of the two class means.
/// Labels above one half count as positives.
struct ClassWeights {
    positive: f64,
    negative: f64,
}

impl ClassWeights {
    fn of(&self, label: f64) -> f64 {
        if label > 0.5 {
            self.positive
        } else {
            self.negative
        }
    }
}

fn class_weights(pairs: &[LabelledPair]) -> ClassWeights {
    let positives = pairs.iter().filter(|p| p.label > 0.5).count();
    let negatives = pairs.len() - positives;
    ClassWeights {
        positive: 1.0 / positives.max(1) as f64,
        negative: 1.0 / negatives.max(1) as f64,
    }
}
