//! Topology-imbalance diagnostics: the reaching coefficient (how close
//! unlabeled nodes sit to same-class labeled nodes) and the squashing
//! coefficient (mean Ollivier-Ricci curvature along their supervision paths).

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::graph::{bfs_distances, diameter, Graph, LabelSplit, UNREACHABLE};
use crate::numerics::{min_cost_transport, DiscreteMeasure};

/// Mass kept at the centre node of the lazy random-walk measure.
pub const DEFAULT_LAZINESS: f64 = 0.5;

/// Mass differences below this are treated as cancelled.
const EXCESS_EPS: f64 = 1e-15;

/// Lazy random-walk measure at `k`: `laziness` on `k`, the rest spread
/// uniformly over its neighbours.
pub fn lazy_measure(g: &Graph, k: usize, laziness: f64) -> DiscreteMeasure {
    let (support, mass) = lazy_masses(g, k, laziness).into_iter().unzip();
    DiscreteMeasure::new(support, mass).expect("lazy measure is a probability measure")
}

/// Adjacency rows as bitsets for constant-time edge tests and fast
/// common-neighbour checks.
struct BitAdjacency {
    words: usize,
    bits: Vec<u64>,
}

impl BitAdjacency {
    fn new(g: &Graph) -> Self {
        let words = g.n().div_ceil(64);
        let mut bits = vec![0u64; g.n() * words];
        for u in 0..g.n() {
            for &v in g.neighbors(u) {
                bits[u * words + v / 64] |= 1 << (v % 64);
            }
        }
        Self { words, bits }
    }

    fn row(&self, u: usize) -> &[u64] {
        &self.bits[u * self.words..(u + 1) * self.words]
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.row(u)[v / 64] >> (v % 64) & 1 == 1
    }

    /// Hop distance between a neighbour-or-self of `k` and a
    /// neighbour-or-self of `t` where `k ~ t`; such distances never exceed 3.
    fn local_hop(&self, u: usize, v: usize) -> f64 {
        if u == v {
            0.0
        } else if self.has_edge(u, v) {
            1.0
        } else if self.row(u).iter().zip(self.row(v)).any(|(a, b)| a & b != 0) {
            2.0
        } else {
            3.0
        }
    }
}

/// `(node, mass)` pairs of the lazy measure at `k`, sorted by node.
fn lazy_masses(g: &Graph, k: usize, laziness: f64) -> Vec<(usize, f64)> {
    let nbrs = g.neighbors(k);
    if nbrs.is_empty() {
        return vec![(k, 1.0)];
    }
    let share = (1.0 - laziness) / nbrs.len() as f64;
    let mut out: Vec<(usize, f64)> = nbrs.iter().map(|&v| (v, share)).collect();
    let at = out.partition_point(|&(v, _)| v < k);
    out.insert(at, (k, laziness));
    out
}

/// Ollivier-Ricci curvature `1 − W₁(m_k, m_t)` of the edge `(k, t)` with the
/// given laziness.
///
/// Mass the two measures share at a node stays put: for a metric ground cost
/// `W₁(μ, ν) = W₁(μ − μ∧ν, ν − μ∧ν)`, so only the excess is transported.
pub fn ricci_curvature_with(g: &Graph, k: usize, t: usize, laziness: f64) -> Result<f64> {
    if k >= g.n() || t >= g.n() || !g.has_edge(k, t) {
        return Err(PastelError::NotAnEdge(k, t));
    }
    Ok(curvature_of(g, &BitAdjacency::new(g), k, t, laziness))
}

fn curvature_of(g: &Graph, adj: &BitAdjacency, k: usize, t: usize, laziness: f64) -> f64 {
    let mk = lazy_masses(g, k, laziness);
    let mt = lazy_masses(g, t, laziness);
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    let mut push = |v: usize, diff: f64| {
        if diff > EXCESS_EPS {
            sources.push((v, diff));
        } else if diff < -EXCESS_EPS {
            sinks.push((v, -diff));
        }
    };
    let (mut i, mut j) = (0, 0);
    while i < mk.len() || j < mt.len() {
        let a = mk.get(i).map_or(usize::MAX, |e| e.0);
        let b = mt.get(j).map_or(usize::MAX, |e| e.0);
        match a.cmp(&b) {
            std::cmp::Ordering::Less => {
                push(a, mk[i].1);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                push(b, -mt[j].1);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                push(a, mk[i].1 - mt[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    if sources.is_empty() || sinks.is_empty() {
        return 1.0;
    }
    // Rounding leaves the two sides a hair apart; balance on the smaller.
    let supply_total: f64 = sources.iter().map(|s| s.1).sum();
    let demand_total: f64 = sinks.iter().map(|s| s.1).sum();
    let scale = supply_total.min(demand_total);
    let supply: Vec<f64> = sources.iter().map(|s| s.1 * scale / supply_total).collect();
    let demand: Vec<f64> = sinks.iter().map(|s| s.1 * scale / demand_total).collect();
    let mut cost = Vec::with_capacity(supply.len() * demand.len());
    for &(u, _) in &sources {
        for &(v, _) in &sinks {
            cost.push(adj.local_hop(u, v));
        }
    }
    1.0 - min_cost_transport(&supply, &demand, &cost)
}

/// Ollivier-Ricci curvature with laziness 0.5.
pub fn ricci_curvature(g: &Graph, k: usize, t: usize) -> Result<f64> {
    ricci_curvature_with(g, k, t, DEFAULT_LAZINESS)
}

/// Curvature of every edge of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureMap {
    edges: Vec<(usize, usize)>,
    values: Vec<f64>,
    index: HashMap<(usize, usize), usize>,
}

impl CurvatureMap {
    pub fn compute(g: &Graph) -> Result<Self> {
        Self::compute_with(g, DEFAULT_LAZINESS)
    }

    pub fn compute_with(g: &Graph, laziness: f64) -> Result<Self> {
        Self::compute_edges(g, g.edges(), laziness)
    }

    /// Curvature of the listed edges only, each given as `(u, v)` with
    /// `u < v`.
    pub fn compute_edges(g: &Graph, edges: Vec<(usize, usize)>, laziness: f64) -> Result<Self> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= v || v >= g.n() || !g.has_edge(u, v)) {
            return Err(PastelError::NotAnEdge(u, v));
        }
        let adj = BitAdjacency::new(g);
        let values = edges
            .par_iter()
            .map(|&(u, v)| curvature_of(g, &adj, u, v, laziness))
            .collect();
        let index = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        Ok(Self {
            edges,
            values,
            index,
        })
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.index.get(&key).map(|&i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// `(u, v, κ)` triples with `u < v`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges
            .iter()
            .zip(&self.values)
            .map(|(&(u, v), &k)| (u, v, k))
    }
}

/// BFS distances from every labeled node.
struct AnchorDistances(HashMap<usize, Vec<usize>>);

impl AnchorDistances {
    fn new(g: &Graph, split: &LabelSplit) -> Self {
        let anchors: Vec<usize> = split.labeled().into_iter().map(|(v, _)| v).collect();
        let dists: Vec<(usize, Vec<usize>)> = anchors
            .par_iter()
            .map(|&a| (a, bfs_distances(g, a)))
            .collect();
        Self(dists.into_iter().collect())
    }

    fn get(&self, anchor: usize) -> &[usize] {
        &self.0[&anchor]
    }
}

fn reach_terms(
    g: &Graph,
    split: &LabelSplit,
    anchors: &AnchorDistances,
) -> Result<Vec<(usize, f64)>> {
    let d_g = diameter(g)?;
    if d_g < 2 {
        return Err(PastelError::DegenerateDiameter(d_g));
    }
    let log_d = (d_g as f64).ln();
    Ok(split
        .unlabeled()
        .iter()
        .filter_map(|&v| split.label(v).map(|y| (v, y)))
        .map(|(v, y)| {
            let set = split.anchors(y);
            let total: f64 = set
                .iter()
                .map(|&a| {
                    let d = anchors.get(a)[v];
                    let len = if d == UNREACHABLE { d_g } else { d };
                    1.0 - (len as f64).ln() / log_d
                })
                .sum();
            (v, total / set.len() as f64)
        })
        .collect())
}

/// Reaching coefficient: mean over unlabeled nodes of the mean over their
/// same-class anchors of `1 − log|path| / log D_G`, unreachable pairs
/// counting as length `D_G`.
pub fn reaching_coefficient(g: &Graph, split: &LabelSplit) -> Result<f64> {
    let anchors = AnchorDistances::new(g, split);
    let terms = reach_terms(g, split, &anchors)?;
    Ok(mean(terms.iter().map(|t| t.1)))
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// The shortest path from `from` to the node whose BFS distances are `dist`,
/// stepping to the smallest-id neighbour one hop closer each time. This is
/// the lexicographically smallest shortest path starting at `from`.
pub fn canonical_path(g: &Graph, from: usize, dist: &[usize]) -> Option<Vec<usize>> {
    if dist[from] == UNREACHABLE {
        return None;
    }
    let mut path = vec![from];
    let mut cur = from;
    while dist[cur] > 0 {
        let want = dist[cur] - 1;
        cur = *g
            .neighbors(cur)
            .iter()
            .find(|&&w| dist[w] == want)
            .expect("BFS layers are connected");
        path.push(cur);
    }
    Some(path)
}

fn squash_terms(
    g: &Graph,
    split: &LabelSplit,
    curv: &CurvatureMap,
    anchors: &AnchorDistances,
) -> Result<Vec<(usize, f64)>> {
    split
        .unlabeled()
        .iter()
        .filter_map(|&v| split.label(v).map(|y| (v, y)))
        .map(|(v, y)| {
            let mut per_anchor = Vec::new();
            for &a in split.anchors(y) {
                let Some(path) = canonical_path(g, v, anchors.get(a)) else {
                    continue;
                };
                let mut total = 0.0;
                for w in path.windows(2) {
                    total += curv
                        .get(w[0], w[1])
                        .ok_or(PastelError::NotAnEdge(w[0], w[1]))?;
                }
                per_anchor.push(total / (path.len() - 1) as f64);
            }
            Ok((!per_anchor.is_empty()).then(|| (v, mean(per_anchor.into_iter()))))
        })
        .filter_map(Result::transpose)
        .collect()
}

/// Squashing coefficient: mean curvature along one canonical shortest path
/// per reachable same-class anchor, averaged per node and then over the
/// unlabeled nodes that reach at least one anchor.
pub fn squashing_coefficient(g: &Graph, split: &LabelSplit, curv: &CurvatureMap) -> Result<f64> {
    let anchors = AnchorDistances::new(g, split);
    let terms = squash_terms(g, split, curv, &anchors)?;
    if terms.is_empty() {
        return Err(PastelError::NoReachablePairs);
    }
    Ok(mean(terms.iter().map(|t| t.1)))
}

/// Edges on the canonical path from every unlabeled node to each of its
/// reachable same-class anchors.
fn path_edges(g: &Graph, split: &LabelSplit, anchors: &AnchorDistances) -> Vec<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for &v in split.unlabeled() {
        let Some(y) = split.label(v) else { continue };
        for &a in split.anchors(y) {
            if let Some(path) = canonical_path(g, v, anchors.get(a)) {
                edges.extend(path.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))));
            }
        }
    }
    edges.into_iter().collect()
}

/// The two coefficients alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceSummary {
    pub rc: f64,
    pub sc: f64,
}

/// RC and SC without the full curvature map: only edges on supervision
/// paths are evaluated, which keeps dense learned graphs affordable.
pub fn imbalance_summary(g: &Graph, split: &LabelSplit) -> Result<ImbalanceSummary> {
    let anchors = AnchorDistances::new(g, split);
    let curv = CurvatureMap::compute_edges(g, path_edges(g, split, &anchors), DEFAULT_LAZINESS)?;
    let squash = squash_terms(g, split, &curv, &anchors)?;
    if squash.is_empty() {
        return Err(PastelError::NoReachablePairs);
    }
    let reach = reach_terms(g, split, &anchors)?;
    Ok(ImbalanceSummary {
        rc: mean(reach.iter().map(|t| t.1)),
        sc: mean(squash.iter().map(|t| t.1)),
    })
}

/// Both diagnostics plus the per-node and per-edge data behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceReport {
    pub rc: f64,
    pub sc: f64,
    /// `(node, reach term)` for every unlabeled node with a known class.
    pub reach_terms: Vec<(usize, f64)>,
    /// `(node, squash term)` for unlabeled nodes reaching a same-class anchor.
    pub squash_terms: Vec<(usize, f64)>,
    /// `(u, v, κ)` for every edge.
    pub per_edge_curvature: Vec<(usize, usize, f64)>,
}

pub fn imbalance_report(g: &Graph, split: &LabelSplit) -> Result<ImbalanceReport> {
    let curv = CurvatureMap::compute(g)?;
    let anchors = AnchorDistances::new(g, split);
    let squash = squash_terms(g, split, &curv, &anchors)?;
    if squash.is_empty() {
        return Err(PastelError::NoReachablePairs);
    }
    let reach = reach_terms(g, split, &anchors)?;
    Ok(ImbalanceReport {
        rc: mean(reach.iter().map(|t| t.1)),
        sc: mean(squash.iter().map(|t| t.1)),
        reach_terms: reach,
        squash_terms: squash,
        per_edge_curvature: curv.iter().collect(),
    })
}
