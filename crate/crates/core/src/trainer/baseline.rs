use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::{
    init_gcn, node_features, record, score, EpochRecord, LossTerms, Monitor, TrainConfig,
};
use crate::error::{PastelError, Result};
use crate::gnn::{self, predictions, GcnModel};
use crate::graph::{normalized_adjacency, Graph, LabelSplit};
use crate::numerics::{Matrix, OptimizerState};
use crate::seed::{self, StreamRng};

/// Backbone-only comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "rate")]
pub enum BaselineKind {
    PlainGcn,
    /// Adds `Binomial(|E|, rate)` uniformly random non-edges every epoch.
    AddEdge(f64),
    /// Drops each edge independently with probability `rate` every epoch.
    DropEdge(f64),
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PlainGcn => "plain_gcn",
            Self::AddEdge(_) => "add_edge",
            Self::DropEdge(_) => "drop_edge",
        }
    }

    fn rate(&self) -> Option<f64> {
        match *self {
            Self::PlainGcn => None,
            Self::AddEdge(r) | Self::DropEdge(r) => Some(r),
        }
    }
}

/// Result of a baseline run at its best-validation epoch.
#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub kind: BaselineKind,
    pub model: GcnModel,
    pub records: Vec<EpochRecord>,
    pub predictions: Vec<usize>,
    pub best_epoch: usize,
    pub wf1: f64,
    pub mf1: f64,
}

/// One random perturbation of `g` for the edge baselines.
pub fn perturb_edges(g: &Graph, kind: BaselineKind, rng: &mut StreamRng) -> Result<Graph> {
    let n = g.n();
    let a = g.adjacency();
    match kind {
        BaselineKind::PlainGcn => Ok(g.clone()),
        BaselineKind::DropEdge(rate) => {
            let mut out = a.clone();
            for (u, v) in g.edges() {
                if rng.gen::<f64>() < rate {
                    out[(u, v)] = 0.0;
                    out[(v, u)] = 0.0;
                }
            }
            Graph::new(out, g.features().clone())
        }
        BaselineKind::AddEdge(rate) => {
            let edges = g.edge_count() as u64;
            let free = (n * n.saturating_sub(1) / 2) as u64 - edges;
            let want = if rate > 0.0 && edges > 0 {
                Binomial::new(edges, rate)
                    .map_err(|e| PastelError::InvalidParams(e.to_string()))?
                    .sample(rng)
                    .min(free)
            } else {
                0
            };
            let mut out = a.clone();
            let mut added = 0;
            while added < want {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v && out[(u, v)] == 0.0 {
                    out[(u, v)] = 1.0;
                    out[(v, u)] = 1.0;
                    added += 1;
                }
            }
            Graph::new(out, g.features().clone())
        }
    }
}

/// Trains the GCN alone on the original (or per-epoch perturbed) graph.
pub fn run_baseline(
    kind: BaselineKind,
    g: &Graph,
    split: &LabelSplit,
    cfg: &TrainConfig,
) -> Result<BaselineOutput> {
    cfg.validate()?;
    if let Some(r) = kind.rate() {
        if !(0.0..1.0).contains(&r) {
            return Err(PastelError::InvalidParams(format!("edge rate {r} outside [0, 1)")));
        }
    }
    let x = node_features(g);
    let norm_adj = normalized_adjacency(g);
    let labeled = split.labeled();
    let mut model = init_gcn(cfg.seed, x.cols(), cfg.hidden, split.num_classes(), cfg.dropout)?;
    let shapes = [model.w1.shape(), model.w2.shape(), model.wc.shape()];
    let mut opt = OptimizerState::new(cfg.adam(), &shapes);
    let mut dropout_rng = seed::stream(cfg.seed, "dropout");
    let mut perturb_rng = seed::stream(cfg.seed, "perturb");
    let mut monitor = Monitor::new(cfg.patience);
    let mut records = Vec::new();
    let mut best = None;

    for epoch in 1..=cfg.epochs {
        let adj: Matrix = match kind {
            BaselineKind::PlainGcn => norm_adj.clone(),
            _ => normalized_adjacency(&perturb_edges(g, kind, &mut perturb_rng)?),
        };
        let mut out = gnn::forward(&model, &adj, &x, Some(&mut dropout_rng))?;
        let (cls, d_logits) = gnn::cross_entropy_on(&out.logits, &labeled)?;
        if !cls.is_finite() {
            return Err(PastelError::DivergedLoss(epoch));
        }
        let grads = gnn::backward(&mut out.tape, &model, &d_logits)?;
        opt.step(
            &mut [
                ("gcn.w1", &mut model.w1),
                ("gcn.w2", &mut model.w2),
                ("gcn.wc", &mut model.wc),
            ],
            &[grads.w1, grads.w2, grads.wc],
        )?;

        let eval = gnn::forward_eval(&model, &norm_adj, &x)?;
        let scores = score(&eval.logits, split)?;
        let terms = LossTerms {
            total: cls,
            cls,
            smooth: 0.0,
            con: 0.0,
            spar: 0.0,
        };
        records.push(record(epoch, &terms, &scores, (1.0, 0.0)));
        let (is_best, stop) = monitor.observe(&scores);
        if is_best {
            best = Some((model.clone(), predictions(&eval.logits), epoch, scores.test_wf1, scores.test_mf1));
        }
        if stop {
            break;
        }
    }
    let (model, predictions, best_epoch, wf1, mf1) = best.expect("at least one epoch ran");
    Ok(BaselineOutput {
        kind,
        model,
        records,
        predictions,
        best_epoch,
        wf1,
        mf1,
    })
}

