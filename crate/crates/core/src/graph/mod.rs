//! Graph data model, SBM generation, hop-distance machinery, GCN
//! normalisation, label splits and file IO.

mod io;
mod paths;
mod sbm;
mod split;

use std::sync::OnceLock;

pub use io::{load_graph, save_graph, GraphFiles};
pub use paths::{all_pairs_hops, bfs_distances, diameter, HopMatrix, UNREACHABLE};
pub use sbm::{generate_sbm, SbmParams};
pub use split::{sample_split, sample_split_from, LabelSplit};

use crate::error::{PastelError, Result};
use crate::numerics::Matrix;

/// Symmetry tolerance for adjacency matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Undirected weighted graph with dense adjacency and node features.
///
/// Hop metrics treat every nonzero off-diagonal entry as an edge regardless
/// of its weight.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Matrix,
    neighbors: Vec<Vec<usize>>,
    features: Matrix,
    diameter_cache: OnceLock<Option<usize>>,
}

impl Graph {
    pub fn new(adjacency: Matrix, features: Matrix) -> Result<Self> {
        let n = adjacency.rows();
        if adjacency.cols() != n {
            return Err(PastelError::ShapeMismatch(format!(
                "adjacency must be square, got {:?}",
                adjacency.shape()
            )));
        }
        if features.rows() != n {
            return Err(PastelError::InconsistentNodeCount(format!(
                "{n} nodes but {} feature rows",
                features.rows()
            )));
        }
        for i in 0..n {
            for j in i..n {
                let (a, b) = (adjacency[(i, j)], adjacency[(j, i)]);
                if !a.is_finite() || a < 0.0 {
                    return Err(PastelError::InvalidParams(format!(
                        "adjacency entry ({i}, {j}) = {a} must be finite and nonnegative"
                    )));
                }
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(PastelError::InvalidParams(format!(
                        "adjacency is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let neighbors = (0..n)
            .map(|i| {
                adjacency
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, &w)| j != i && w != 0.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Ok(Self {
            adjacency,
            neighbors,
            features,
            diameter_cache: OnceLock::new(),
        })
    }

    /// Builds a graph from an undirected edge list; repeated pairs keep the
    /// last weight.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], features: Matrix) -> Result<Self> {
        let mut adjacency = Matrix::zeros(n, n);
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(PastelError::InconsistentNodeCount(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            adjacency[(u, v)] = w;
            adjacency[(v, u)] = w;
        }
        Self::new(adjacency, features)
    }

    /// Graph whose edges are the nonzero off-diagonal entries of a learned
    /// symmetric structure; the diagonal is dropped.
    pub fn from_structure(structure: &Matrix, features: Matrix) -> Result<Self> {
        let mut adjacency = structure.clone();
        for i in 0..adjacency.rows().min(adjacency.cols()) {
            adjacency[(i, i)] = 0.0;
        }
        Self::new(adjacency, features)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    /// Sorted neighbours of `i`, excluding `i` itself.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.neighbors[u].binary_search(&v).is_ok()
    }

    /// Undirected edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .flat_map(|u| {
                self.neighbors[u]
                    .iter()
                    .filter(move |&&v| v > u)
                    .map(move |&v| (u, v))
            })
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub(crate) fn cached_diameter(&self, compute: impl FnOnce() -> Option<usize>) -> Option<usize> {
        *self.diameter_cache.get_or_init(compute)
    }

    /// Same structure with new node features.
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.n() {
            return Err(PastelError::InconsistentNodeCount(format!(
                "{} nodes but {} feature rows",
                self.n(),
                features.rows()
            )));
        }
        Ok(Self {
            adjacency: self.adjacency.clone(),
            neighbors: self.neighbors.clone(),
            features,
            diameter_cache: self.diameter_cache.clone(),
        })
    }
}

/// Symmetric GCN normalisation `D̃^{-1/2} (A + I) D̃^{-1/2}` with self-loops
/// added first, so isolated nodes keep an identity row.
pub fn normalized_adjacency(g: &Graph) -> Matrix {
    let n = g.n();
    let a = g.adjacency();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).iter().sum::<f64>() + 1.0;
            1.0 / d.sqrt()
        })
        .collect();
    Matrix::from_fn(n, n, |i, j| {
        let w = a[(i, j)] + if i == j { 1.0 } else { 0.0 };
        if w == 0.0 {
            0.0
        } else {
            w * (scale[i] * scale[j])
        }
    })
}
