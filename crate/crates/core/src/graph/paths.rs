use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{PastelError, Result};
use crate::graph::Graph;

/// Sentinel hop distance for unreachable nodes.
pub const UNREACHABLE: usize = usize::MAX;

/// Unweighted hop distances from `source` to every node.
pub fn bfs_distances(g: &Graph, source: usize) -> Vec<usize> {
    let mut dist = vec![UNREACHABLE; g.n()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let next = dist[u] + 1;
        for &v in g.neighbors(u) {
            if dist[v] == UNREACHABLE {
                dist[v] = next;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// All-pairs hop distances, one BFS per node.
#[derive(Debug, Clone)]
pub struct HopMatrix {
    n: usize,
    dist: Vec<u32>,
}

impl HopMatrix {
    /// Hop distance, or `None` when `v` is unreachable from `u`.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<usize> {
        let d = self.dist[u * self.n + v];
        (d != u32::MAX).then_some(d as usize)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest finite distance in the matrix.
    pub fn max_finite(&self) -> usize {
        self.dist
            .iter()
            .filter(|&&d| d != u32::MAX)
            .max()
            .copied()
            .unwrap_or(0) as usize
    }
}

pub fn all_pairs_hops(g: &Graph) -> HopMatrix {
    let n = g.n();
    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|s| {
            bfs_distances(g, s)
                .into_iter()
                .map(|d| if d == UNREACHABLE { u32::MAX } else { d as u32 })
                .collect()
        })
        .collect();
    HopMatrix {
        n,
        dist: rows.into_iter().flatten().collect(),
    }
}

/// Maximum eccentricity over all connected components. Cached on the graph.
pub fn diameter(g: &Graph) -> Result<usize> {
    if g.edge_count() == 0 {
        return Err(PastelError::EmptyGraph);
    }
    let d = g.cached_diameter(|| {
        (0..g.n())
            .into_par_iter()
            .map(|s| {
                bfs_distances(g, s)
                    .into_iter()
                    .filter(|&d| d != UNREACHABLE)
                    .max()
                    .unwrap_or(0)
            })
            .max()
    });
    d.ok_or(PastelError::EmptyGraph)
}
