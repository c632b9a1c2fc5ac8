//! Group PageRank label influence and the class-wise conflict weights
//! derived from it.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::graph::{Graph, LabelSplit};
use crate::numerics::{solve_linear, Matrix};

/// Additive smoothing applied to normalized GPR rows before KL.
pub const KL_SMOOTHING: f64 = 1e-10;
/// Rows whose mass is below this are treated as unreached.
pub const ZERO_ROW_TOLERANCE: f64 = 1e-12;

/// `N × C` influence of every class's labeled set on every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprMatrix {
    pub values: Matrix,
    pub alpha: f64,
}

/// Teleport matrix: column `c` holds `1/|V_L^c|` on the class-`c` anchors.
pub fn teleport_matrix(split: &LabelSplit) -> Result<Matrix> {
    let mut t = Matrix::zeros(split.n(), split.num_classes());
    for (c, set) in split.anchor_sets().iter().enumerate() {
        if set.is_empty() {
            return Err(PastelError::EmptyAnchorSet(c));
        }
        let share = 1.0 / set.len() as f64;
        for &v in set {
            t[(v, c)] = share;
        }
    }
    Ok(t)
}

/// Column-normalized transition matrix `A·D⁻¹`; zero-degree columns stay zero.
/// The diagonal of `adjacency` is ignored.
pub fn transition_matrix(adjacency: &Matrix) -> Matrix {
    let n = adjacency.rows();
    let mut deg = vec![0.0; n];
    for i in 0..n {
        for (j, &a) in adjacency.row(i).iter().enumerate() {
            if i != j {
                deg[j] += a;
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| {
        if i == j || deg[j] <= 0.0 {
            0.0
        } else {
            adjacency[(i, j)] / deg[j]
        }
    })
}

/// Group PageRank on a weighted adjacency matrix:
/// `P = α (I − (1−α) A D⁻¹)⁻¹ I*`.
pub fn group_pagerank_on(adjacency: &Matrix, split: &LabelSplit, alpha: f64) -> Result<GprMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PastelError::InvalidParams(format!(
            "restart probability {alpha} outside (0, 1)"
        )));
    }
    if adjacency.rows() != split.n() || adjacency.cols() != split.n() {
        return Err(PastelError::ShapeMismatch(format!(
            "adjacency {:?} vs {} split nodes",
            adjacency.shape(),
            split.n()
        )));
    }
    let teleport = teleport_matrix(split)?;
    let n = split.n();
    let mut system = transition_matrix(adjacency).scale(-(1.0 - alpha));
    for i in 0..n {
        system[(i, i)] += 1.0;
    }
    let values = solve_linear(&system, &teleport.scale(alpha))?;
    Ok(GprMatrix { values, alpha })
}

pub fn group_pagerank(g: &Graph, split: &LabelSplit, alpha: f64) -> Result<GprMatrix> {
    group_pagerank_on(g.adjacency(), split, alpha)
}

/// L1-normalized, ε-smoothed row, or `None` for an unreached row.
fn smoothed_row(row: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = row.iter().sum();
    if total < ZERO_ROW_TOLERANCE {
        return None;
    }
    let norm = 1.0 + KL_SMOOTHING * row.len() as f64;
    Some(
        row.iter()
            .map(|&x| (x / total + KL_SMOOTHING) / norm)
            .collect(),
    )
}

/// `KL(p̂_i ‖ p̂_j)` between two smoothed GPR rows.
pub fn conflict_kl(p: &GprMatrix, i: usize, j: usize) -> Result<f64> {
    let a = smoothed_row(p.values.row(i)).ok_or(PastelError::ZeroRow(i))?;
    let b = smoothed_row(p.values.row(j)).ok_or(PastelError::ZeroRow(j))?;
    if i == j {
        return Ok(0.0);
    }
    Ok(a.iter()
        .zip(&b)
        .map(|(&x, &y)| x * (x / y).ln())
        .sum::<f64>()
        .max(0.0))
}

/// Pairwise conflicts and the weights derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictWeights {
    pub kl: Matrix,
    pub w: Matrix,
}

/// KL conflict for all ordered pairs. Pairs involving an unreached row get
/// `+∞` (maximal conflict); the diagonal is 0.
pub fn conflict_matrix(p: &GprMatrix) -> Matrix {
    let n = p.values.rows();
    let rows: Vec<Option<Vec<f64>>> = (0..n).map(|i| smoothed_row(p.values.row(i))).collect();
    let logs: Vec<Option<Vec<f64>>> = rows
        .iter()
        .map(|r| r.as_ref().map(|r| r.iter().map(|x| x.ln()).collect()))
        .collect();
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            let logs = &logs;
            (0..n).map(move |j| {
                if i == j {
                    return 0.0;
                }
                match (&rows[i], &logs[i], &logs[j]) {
                    (Some(pi), Some(li), Some(lj)) => pi
                        .iter()
                        .zip(li.iter().zip(lj))
                        .map(|(&x, (&lx, &ly))| x * (lx - ly))
                        .sum::<f64>()
                        .max(0.0),
                    _ => f64::INFINITY,
                }
            })
        })
        .collect();
    Matrix::from_vec(n, n, data).expect("n × n")
}

/// Cosine-annealed weights `½(1 − cos(π·rank/N²))` with ranks taken in
/// descending conflict order (rank 1 = largest) and ties sharing their
/// average rank.
pub fn anneal_weights(kl: &Matrix) -> Matrix {
    let total = kl.data().len();
    let mut order: Vec<usize> = (0..total).collect();
    let d = kl.data();
    order.par_sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let mut w = vec![0.0; total];
    let mut start = 0;
    while start < total {
        let mut end = start + 1;
        while end < total && d[order[end]] == d[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end share their mean.
        let rank = (start + 1 + end) as f64 / 2.0;
        let x = rank / total as f64;
        let weight = 0.5 * (1.0 - (PI * x).cos());
        for &k in &order[start..end] {
            w[k] = weight;
        }
        start = end;
    }
    Matrix::from_vec(kl.rows(), kl.cols(), w).expect("same shape")
}

pub fn conflict_weights(p: &GprMatrix) -> ConflictWeights {
    let kl = conflict_matrix(p);
    let w = anneal_weights(&kl);
    ConflictWeights { kl, w }
}
