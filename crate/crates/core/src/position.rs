//! Anchor-based position encoding.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::graph::{bfs_distances, diameter, Graph, LabelSplit, UNREACHABLE};
use crate::numerics::Matrix;

/// Mean hop distance from every node to the reachable members of each
/// anchor set (`D_G` when none is reachable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionProfile {
    pub p: Matrix,
    /// Identifies the structure the profile was measured on (epoch index in
    /// training, 0 for the original graph).
    pub graph_version: usize,
}

pub fn position_profile(g: &Graph, split: &LabelSplit) -> Result<PositionProfile> {
    if g.n() != split.n() {
        return Err(PastelError::ShapeMismatch(format!(
            "graph has {} nodes, split {}",
            g.n(),
            split.n()
        )));
    }
    let d_g = match diameter(g) {
        Ok(d) => d,
        Err(PastelError::EmptyGraph) => 0,
        Err(e) => return Err(e),
    } as f64;
    let classes = split.num_classes();
    let mut p = Matrix::zeros(g.n(), classes);
    for c in 0..classes {
        let set = split.anchors(c);
        if set.is_empty() {
            return Err(PastelError::EmptyAnchorSet(c));
        }
        let dists: Vec<Vec<usize>> = set.par_iter().map(|&a| bfs_distances(g, a)).collect();
        for v in 0..g.n() {
            let (sum, count) = dists
                .iter()
                .map(|d| d[v])
                .filter(|&d| d != UNREACHABLE)
                .fold((0usize, 0usize), |(s, k), d| (s + d, k + 1));
            p[(v, c)] = if count == 0 {
                d_g
            } else {
                sum as f64 / count as f64
            };
        }
    }
    Ok(PositionProfile {
        p,
        graph_version: 0,
    })
}

impl PositionProfile {
    pub fn with_version(mut self, version: usize) -> Self {
        self.graph_version = version;
        self
    }

    /// Same profile with every class column shifted to zero mean and scaled
    /// to unit variance over the nodes; constant columns become 0.
    pub fn standardized(&self) -> Self {
        let (n, c) = self.p.shape();
        let mut p = self.p.clone();
        for k in 0..c {
            let mean = (0..n).map(|i| self.p[(i, k)]).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| (self.p[(i, k)] - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            for i in 0..n {
                p[(i, k)] = if sd > 0.0 { (self.p[(i, k)] - mean) / sd } else { 0.0 };
            }
        }
        Self {
            p,
            graph_version: self.graph_version,
        }
    }
}

/// Linear map `h^p_i = W_φ p_i` from class-distance profiles to `d₀`-dim
/// encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEncoder {
    /// `d₀ × C`.
    pub w_phi: Matrix,
}

impl PositionEncoder {
    /// Uniform `±1/√C` initialization.
    pub fn new(out_dim: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (classes.max(1) as f64).sqrt();
        Self {
            w_phi: Matrix::from_fn(out_dim, classes, |_, _| rng.gen_range(-bound..=bound)),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w_phi.rows()
    }

    pub fn classes(&self) -> usize {
        self.w_phi.cols()
    }
}

/// `N × d₀` encodings `P W_φᵀ`.
pub fn encode(profile: &PositionProfile, enc: &PositionEncoder) -> Result<Matrix> {
    if profile.p.cols() != enc.classes() {
        return Err(PastelError::ShapeMismatch(format!(
            "profile has {} classes, encoder expects {}",
            profile.p.cols(),
            enc.classes()
        )));
    }
    profile.p.matmul_t(&enc.w_phi)
}

/// Gradient of a loss w.r.t. `W_φ` given its gradient `d_h` w.r.t. the
/// encodings.
pub fn encode_backward(profile: &PositionProfile, d_h: &Matrix) -> Result<Matrix> {
    d_h.t_matmul(&profile.p)
}
