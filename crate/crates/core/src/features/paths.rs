use std::collections::VecDeque;

use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::graph::LineageGraph;

/// Undirected hop count between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HopDistance {
    Hops(u32),
    Unreachable,
}

impl HopDistance {
    /// Tabular encoding: the hop count, or -1 when unreachable.
    pub fn to_i64(self) -> i64 {
        match self {
            HopDistance::Hops(h) => i64::from(h),
            HopDistance::Unreachable => -1,
        }
    }

    pub fn from_i64(v: i64) -> Self {
        match u32::try_from(v) {
            Ok(h) => HopDistance::Hops(h),
            Err(_) => HopDistance::Unreachable,
        }
    }

    pub fn hops(self) -> Option<u32> {
        match self {
            HopDistance::Hops(h) => Some(h),
            HopDistance::Unreachable => None,
        }
    }
}

impl Serialize for HopDistance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i64(self.to_i64())
    }
}

const UNSEEN: u32 = u32::MAX;

/// Hop distance from `source` to every node, in graph index order.
pub fn bfs_hops(graph: &LineageGraph, source: usize) -> Vec<HopDistance> {
    let mut dist = vec![UNSEEN; graph.node_count()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let next = dist[u] + 1;
        for &v in graph.neighbor_indices(u) {
            let slot = &mut dist[v as usize];
            if *slot == UNSEEN {
                *slot = next;
                queue.push_back(v as usize);
            }
        }
    }
    dist.into_iter()
        .map(|d| if d == UNSEEN { HopDistance::Unreachable } else { HopDistance::Hops(d) })
        .collect()
}

/// Breadth-first search from `u`, stopping as soon as `v` is reached.
pub fn shortest_path_hops(graph: &LineageGraph, u: &str, v: &str) -> Result<HopDistance> {
    let s = graph.require_index(u)?;
    let t = graph.require_index(v)?;
    Ok(hops_between(graph, s, t))
}

pub fn hops_between(graph: &LineageGraph, s: usize, t: usize) -> HopDistance {
    if s == t {
        return HopDistance::Hops(0);
    }
    let mut dist = vec![UNSEEN; graph.node_count()];
    let mut queue = VecDeque::new();
    dist[s] = 0;
    queue.push_back(s);
    while let Some(x) = queue.pop_front() {
        let next = dist[x] + 1;
        for &y in graph.neighbor_indices(x) {
            let y = y as usize;
            if dist[y] == UNSEEN {
                if y == t {
                    return HopDistance::Hops(next);
                }
                dist[y] = next;
                queue.push_back(y);
            }
        }
    }
    HopDistance::Unreachable
}
