//! Exact discrete optimal transport.
//!
//! The transportation problem between two finitely supported measures is
//! solved as a min-cost flow on the bipartite support graph using a
//! primal-dual method. Supports are small (a node and its neighbours), so
//! dense `O(V²)` passes are used throughout.

use crate::error::{PastelError, Result};

/// Tolerance on mass conservation and measure normalisation.
pub const MASS_TOLERANCE: f64 = 1e-9;

const RESIDUAL_EPS: f64 = 1e-15;

/// Reduced costs this close to zero count as admissible.
const TIGHT_EPS: f64 = 1e-9;

/// Probability measure over node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Vec<usize>,
    mass: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(PastelError::ShapeMismatch(format!(
                "measure support has {} ids but {} masses",
                support.len(),
                mass.len()
            )));
        }
        if support.is_empty() {
            return Err(PastelError::InvalidParams("empty measure support".into()));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(PastelError::InvalidParams(
                "measure masses must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(PastelError::InvalidParams(format!(
                "measure masses sum to {total}, expected 1"
            )));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(PastelError::InvalidParams(
                "measure support ids must be distinct".into(),
            ));
        }
        Ok(Self { support, mass })
    }

    /// Point mass at `node`.
    pub fn dirac(node: usize) -> Self {
        Self {
            support: vec![node],
            mass: vec![1.0],
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_at(&self, node: usize) -> f64 {
        self.support
            .iter()
            .position(|&s| s == node)
            .map_or(0.0, |i| self.mass[i])
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// Exact 1-Wasserstein distance between `mu` and `nu` under ground cost `dist`.
pub fn wasserstein1(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    dist: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    let (sm, tm) = (mu.total(), nu.total());
    if (sm - tm).abs() > MASS_TOLERANCE {
        return Err(PastelError::InfeasibleTransport {
            source_mass: sm,
            target_mass: tm,
        });
    }
    let rows: Vec<(usize, f64)> = mu
        .support
        .iter()
        .copied()
        .zip(mu.mass.iter().copied())
        .filter(|&(_, m)| m > 0.0)
        .collect();
    let cols: Vec<(usize, f64)> = nu
        .support
        .iter()
        .copied()
        .zip(nu.mass.iter().copied())
        .filter(|&(_, m)| m > 0.0)
        .collect();
    if rows.is_empty() || cols.is_empty() {
        return Ok(0.0);
    }
    let mut cost = Vec::with_capacity(rows.len() * cols.len());
    for &(u, _) in &rows {
        for &(v, _) in &cols {
            let c = dist(u, v);
            if !c.is_finite() || c < 0.0 {
                return Err(PastelError::InvalidParams(format!(
                    "ground cost between {u} and {v} is {c}"
                )));
            }
            cost.push(c);
        }
    }
    let supply: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let demand: Vec<f64> = cols.iter().map(|c| c.1).collect();
    Ok(min_cost_transport(&supply, &demand, &cost))
}

/// Optimal value of the balanced transportation problem with a dense
/// `supply.len() × demand.len()` cost matrix.
///
/// Primal-dual: each phase raises the node potentials by a Dijkstra pass on
/// reduced costs, then pushes a maximum flow through the arcs whose reduced
/// cost is zero. With few distinct cost values only a handful of phases run.
pub fn min_cost_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let a = supply.len();
    let b = demand.len();
    debug_assert_eq!(cost.len(), a * b);
    let mut net = Network {
        a,
        b,
        cost,
        supply: supply.to_vec(),
        demand: demand.to_vec(),
        flow: vec![0.0; a * b],
        potential: vec![0.0; a + b],
        tight: vec![false; a * b],
        level: vec![usize::MAX; a + b],
        next: vec![0; a + b],
    };
    for j in 0..b {
        net.potential[a + j] = (0..a).map(|i| cost[i * b + j]).fold(f64::INFINITY, f64::min);
    }
    while net.supply.iter().any(|&s| s > RESIDUAL_EPS) && net.demand.iter().any(|&d| d > RESIDUAL_EPS) {
        if !net.raise_potentials() {
            break;
        }
        net.mark_tight();
        let mut progressed = false;
        while let Some(t_level) = net.build_levels() {
            net.next.fill(0);
            let mut pushed_any = false;
            for i in 0..a {
                while net.supply[i] > RESIDUAL_EPS {
                    let pushed = net.push(i, net.supply[i], t_level);
                    if pushed <= 0.0 {
                        break;
                    }
                    net.supply[i] -= pushed;
                    if net.supply[i] < RESIDUAL_EPS {
                        net.supply[i] = 0.0;
                    }
                    pushed_any = true;
                }
            }
            if !pushed_any {
                break;
            }
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
    net.flow.iter().zip(cost).map(|(f, c)| f * c).sum()
}

/// Residual state of the bipartite transport network. Rows are vertices
/// `0..a`, columns `a..a + b`; source and sink arcs are implicit in the
/// remaining `supply` and `demand`.
struct Network<'c> {
    a: usize,
    b: usize,
    cost: &'c [f64],
    supply: Vec<f64>,
    demand: Vec<f64>,
    flow: Vec<f64>,
    potential: Vec<f64>,
    tight: Vec<bool>,
    level: Vec<usize>,
    next: Vec<usize>,
}

impl Network<'_> {
    fn reduced(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.b + j] + self.potential[i] - self.potential[self.a + j]
    }

    /// Dense Dijkstra from every row with supply left; potentials rise by
    /// the distance, capped at the nearest column with demand left. Returns
    /// false when no such column is reachable.
    fn raise_potentials(&mut self) -> bool {
        let (a, b) = (self.a, self.b);
        let nv = a + b;
        let mut dist = vec![f64::INFINITY; nv];
        let mut done = vec![false; nv];
        for i in 0..a {
            if self.supply[i] > RESIDUAL_EPS {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nv {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < a {
                for j in 0..b {
                    let v = a + j;
                    if !done[v] {
                        let d = dist[u] + self.reduced(u, j).max(0.0);
                        if d < dist[v] {
                            dist[v] = d;
                        }
                    }
                }
            } else {
                let j = u - a;
                for i in 0..a {
                    if !done[i] && self.flow[i * b + j] > RESIDUAL_EPS {
                        let d = dist[u] + (-self.reduced(i, j)).max(0.0);
                        if d < dist[i] {
                            dist[i] = d;
                        }
                    }
                }
            }
        }
        let reach = (0..b)
            .filter(|&j| self.demand[j] > RESIDUAL_EPS)
            .map(|j| dist[a + j])
            .fold(f64::INFINITY, f64::min);
        if !reach.is_finite() {
            return false;
        }
        for (p, d) in self.potential.iter_mut().zip(&dist) {
            *p += d.min(reach);
        }
        true
    }

    fn mark_tight(&mut self) {
        for i in 0..self.a {
            for j in 0..self.b {
                self.tight[i * self.b + j] = self.reduced(i, j).abs() <= TIGHT_EPS;
            }
        }
    }

    /// BFS levels over tight residual arcs; returns the level of the implicit
    /// sink, or `None` when it is unreachable.
    fn build_levels(&mut self) -> Option<usize> {
        let (a, b) = (self.a, self.b);
        self.level.fill(usize::MAX);
        let mut queue = std::collections::VecDeque::new();
        for i in 0..a {
            if self.supply[i] > RESIDUAL_EPS {
                self.level[i] = 0;
                queue.push_back(i);
            }
        }
        let mut sink = None;
        while let Some(u) = queue.pop_front() {
            if sink.is_some_and(|s| self.level[u] + 1 >= s) {
                continue;
            }
            if u < a {
                for j in 0..b {
                    let v = a + j;
                    if self.level[v] == usize::MAX && self.tight[u * b + j] {
                        self.level[v] = self.level[u] + 1;
                        if self.demand[j] > RESIDUAL_EPS && sink.is_none() {
                            sink = Some(self.level[v] + 1);
                        }
                        queue.push_back(v);
                    }
                }
            } else {
                let j = u - a;
                for i in 0..a {
                    if self.level[i] == usize::MAX
                        && self.tight[i * b + j]
                        && self.flow[i * b + j] > RESIDUAL_EPS
                    {
                        self.level[i] = self.level[u] + 1;
                        queue.push_back(i);
                    }
                }
            }
        }
        sink
    }

    /// One augmenting path of the level graph from `u` carrying at most `f`.
    fn push(&mut self, u: usize, f: f64, t_level: usize) -> f64 {
        let (a, b) = (self.a, self.b);
        if u >= a {
            let j = u - a;
            if self.level[u] + 1 == t_level && self.demand[j] > RESIDUAL_EPS {
                let d = f.min(self.demand[j]);
                self.demand[j] -= d;
                if self.demand[j] < RESIDUAL_EPS {
                    self.demand[j] = 0.0;
                }
                return d;
            }
            if self.level[u] + 1 >= t_level {
                return 0.0;
            }
            while self.next[u] < a {
                let i = self.next[u];
                let idx = i * b + j;
                if self.tight[idx] && self.level[i] == self.level[u] + 1 && self.flow[idx] > RESIDUAL_EPS {
                    let d = self.push(i, f.min(self.flow[idx]), t_level);
                    if d > 0.0 {
                        self.flow[idx] -= d;
                        if self.flow[idx] < RESIDUAL_EPS {
                            self.flow[idx] = 0.0;
                        }
                        return d;
                    }
                }
                self.next[u] += 1;
            }
        } else {
            if self.level[u] + 1 >= t_level {
                return 0.0;
            }
            while self.next[u] < b {
                let j = self.next[u];
                let idx = u * b + j;
                if self.tight[idx] && self.level[a + j] == self.level[u] + 1 {
                    let d = self.push(a + j, f, t_level);
                    if d > 0.0 {
                        self.flow[idx] += d;
                        return d;
                    }
                }
                self.next[u] += 1;
            }
        }
        0.0
    }
}
