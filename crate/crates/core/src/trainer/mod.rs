//! The training loop, its baselines and the label-placement studies.

mod baseline;
mod eval;
mod pipeline;
mod study;

pub use baseline::{perturb_edges, run_baseline, BaselineKind, BaselineOutput};
pub use eval::{f1_scores, spearman};
pub use pipeline::{
    init_gcn, init_state, pipeline_loss, pipeline_step, EpochInputs, LossTerms, ModelState,
    StepResult,
};
pub use study::{label_placement_study, structure_study, StudyRecord};

use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::gnn::{self, predictions};
use crate::gpr::{conflict_weights, group_pagerank_on, GprMatrix};
use crate::graph::{normalized_adjacency, Graph, LabelSplit};
use crate::metrics::{imbalance_summary, ImbalanceSummary};
use crate::numerics::{AdamConfig, Matrix, OptimizerState};
use crate::position::position_profile;
use crate::seed;
use crate::structure::{FusionParams, LearnedStructure};

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Metric-learning heads.
    pub heads: usize,
    /// Group PageRank restart probability.
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Geometric decay factor applied to both fusion coefficients.
    pub decay: f64,
    pub lambda1_floor: f64,
    pub lambda2_floor: f64,
    /// Smoothness weight.
    pub beta1: f64,
    /// Connectivity weight (negative rewards connectivity).
    pub beta2: f64,
    /// Sparsity weight.
    pub beta3: f64,
    /// Similarity threshold below which learned entries are dropped.
    pub a0: f64,
    pub lr: f64,
    pub hidden: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Labeled nodes per class when a split is sampled.
    pub per_class: usize,
    /// Early-stopping patience on validation loss.
    pub patience: usize,
    /// Compute RC/SC of every epoch's structure (slow).
    pub track_imbalance: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            heads: 4,
            alpha: 0.15,
            lambda1: 0.8,
            lambda2: 0.5,
            decay: 0.9,
            lambda1_floor: 0.1,
            lambda2_floor: 0.1,
            beta1: 0.5,
            beta2: -0.3,
            beta3: 0.1,
            a0: 0.3,
            lr: 0.01,
            hidden: 256,
            dropout: 0.5,
            seed: 0,
            per_class: 20,
            patience: 50,
            track_imbalance: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PastelError::InvalidParams(m));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.heads == 0 || self.hidden == 0 || self.per_class == 0 {
            return fail("heads, hidden and per_class must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda1_floor", self.lambda1_floor),
            ("lambda2_floor", self.lambda2_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return fail(format!("decay = {} outside (0, 1]", self.decay));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout = {} outside [0, 1)", self.dropout));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return fail(format!("lr = {} must be positive", self.lr));
        }
        for (name, v) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
            ("a0", self.a0),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} = {v} is not finite"));
            }
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// One step of `λ ← max(floor, ρλ)`. A coefficient at 1 or at/below its
/// floor stays where it is, so a pinned endpoint never moves.
pub fn decay_lambda(lambda: f64, decay: f64, floor: f64) -> f64 {
    if lambda >= 1.0 || lambda <= floor {
        lambda
    } else {
        (decay * lambda).max(floor)
    }
}

/// Per-epoch training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub cls: f64,
    pub smooth: f64,
    pub con: f64,
    pub spar: f64,
    pub val_loss: Option<f64>,
    pub val_wf1: Option<f64>,
    pub val_mf1: Option<f64>,
    pub test_wf1: f64,
    pub test_mf1: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub rc: Option<f64>,
    pub sc: Option<f64>,
}

/// Result of a run, taken at the best-validation epoch.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ModelState,
    pub structure: LearnedStructure,
    pub gpr: GprMatrix,
    pub records: Vec<EpochRecord>,
    pub predictions: Vec<usize>,
    pub best_epoch: usize,
    pub wf1: f64,
    pub mf1: f64,
}

/// Node features, or one-hot identities when the graph carries none.
pub fn node_features(g: &Graph) -> Matrix {
    if g.features().cols() == 0 {
        Matrix::identity(g.n())
    } else {
        g.features().clone()
    }
}

/// Graph on the off-diagonal support of a learned structure.
pub fn structure_graph(a_star: &Matrix) -> Result<Graph> {
    Graph::from_structure(a_star, Matrix::zeros(a_star.rows(), 0))
}

/// RC/SC of a learned structure.
pub fn structure_report(a_star: &Matrix, split: &LabelSplit) -> Result<ImbalanceSummary> {
    imbalance_summary(&structure_graph(a_star)?, split)
}

/// Validation and test scores of one evaluation pass.
struct Scores {
    val_loss: Option<f64>,
    val_wf1: Option<f64>,
    val_mf1: Option<f64>,
    test_wf1: f64,
    test_mf1: f64,
}

fn score(logits: &Matrix, split: &LabelSplit) -> Result<Scores> {
    let preds = predictions(logits);
    let (test_wf1, test_mf1) = f1_scores(&preds, split.labels(), split.test(), split.num_classes())?;
    let val: Vec<(usize, usize)> = split
        .val()
        .iter()
        .filter_map(|&v| split.label(v).map(|c| (v, c)))
        .collect();
    let (val_loss, val_wf1, val_mf1) = if val.is_empty() {
        (None, None, None)
    } else {
        let (loss, _) = gnn::cross_entropy_on(logits, &val)?;
        let (w, m) = f1_scores(&preds, split.labels(), split.val(), split.num_classes())?;
        (Some(loss), Some(w), Some(m))
    };
    Ok(Scores {
        val_loss,
        val_wf1,
        val_mf1,
        test_wf1,
        test_mf1,
    })
}

/// Best-checkpoint and early-stopping bookkeeping shared by every loop.
struct Monitor {
    patience: usize,
    best_score: f64,
    best_loss: f64,
    since_improved: usize,
}

impl Monitor {
    fn new(patience: usize) -> Self {
        Self {
            patience,
            best_score: f64::NEG_INFINITY,
            best_loss: f64::INFINITY,
            since_improved: 0,
        }
    }

    /// Returns `(is_new_best, should_stop)`. Without validation nodes every
    /// epoch is the new best and training never stops early.
    fn observe(&mut self, s: &Scores) -> (bool, bool) {
        let (Some(w), Some(loss)) = (s.val_wf1, s.val_loss) else {
            return (true, false);
        };
        let best = w > self.best_score;
        if best {
            self.best_score = w;
        }
        if loss < self.best_loss {
            self.best_loss = loss;
            self.since_improved = 0;
        } else {
            self.since_improved += 1;
        }
        (best, self.since_improved >= self.patience)
    }
}

fn record(epoch: usize, terms: &LossTerms, s: &Scores, lambdas: (f64, f64)) -> EpochRecord {
    EpochRecord {
        epoch,
        loss: terms.total,
        cls: terms.cls,
        smooth: terms.smooth,
        con: terms.con,
        spar: terms.spar,
        val_loss: s.val_loss,
        val_wf1: s.val_wf1,
        val_mf1: s.val_mf1,
        test_wf1: s.test_wf1,
        test_mf1: s.test_mf1,
        lambda1: lambdas.0,
        lambda2: lambdas.1,
        rc: None,
        sc: None,
    }
}

/// Trains the position-aware structure learner and GCN jointly.
///
/// Each epoch: profile the previous structure, score pairs in both views,
/// weight the position view by Group PageRank conflicts, fuse with the
/// original graph, take one optimizer step on the total loss, evaluate, and
/// decay the fusion coefficients.
pub fn train(g: &Graph, split: &LabelSplit, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if split.n() != g.n() {
        return Err(PastelError::InconsistentNodeCount(format!(
            "graph has {} nodes, split {}",
            g.n(),
            split.n()
        )));
    }
    let x = node_features(g);
    let norm_adj = normalized_adjacency(g);
    let labeled = split.labeled();
    let classes = split.num_classes();
    let mut state = init_state(cfg.seed, x.cols(), cfg.hidden, classes, cfg.heads, cfg.dropout)?;
    let mut opt = OptimizerState::new(cfg.adam(), &state.shapes());
    let mut dropout_rng = seed::stream(cfg.seed, "dropout");

    let profile0 = position_profile(g, split)?.standardized();
    let mut profile = profile0.clone();
    let mut prev_structure = g.adjacency().clone();
    let mut z_prev = gnn::forward_eval(&state.gcn, &norm_adj, &x)?.z;
    let mut lambdas = (cfg.lambda1, cfg.lambda2);
    let mut monitor = Monitor::new(cfg.patience);
    let mut records = Vec::new();
    let mut best: Option<TrainOutput> = None;

    for epoch in 1..=cfg.epochs {
        if epoch > 1 {
            profile = position_profile(&structure_graph(&prev_structure)?, split)?
                .with_version(epoch - 1)
                .standardized();
        }
        let gpr = group_pagerank_on(&prev_structure, split, cfg.alpha)?;
        let conflict = conflict_weights(&gpr);
        let inputs = EpochInputs {
            x: &x,
            norm_adj: &norm_adj,
            profile: &profile,
            profile0: &profile0,
            z_prev: &z_prev,
            conflict_w: &conflict.w,
            labeled: &labeled,
            fusion: FusionParams {
                lambda1: lambdas.0,
                lambda2: lambdas.1,
                a0: cfg.a0,
            },
            betas: [cfg.beta1, cfg.beta2, cfg.beta3],
        };
        let step = pipeline_step(&state, &inputs, Some(&mut dropout_rng))?;
        if !step.terms.total.is_finite() {
            return Err(PastelError::DivergedLoss(epoch));
        }
        opt.step(&mut state.params_mut(), &step.grads)?;

        let out = gnn::forward_eval(&state.gcn, &step.structure.a_star, &x)?;
        let scores = score(&out.logits, split)?;
        let mut rec = record(epoch, &step.terms, &scores, lambdas);
        if cfg.track_imbalance {
            let report = structure_report(&step.structure.a_star, split)?;
            rec.rc = Some(report.rc);
            rec.sc = Some(report.sc);
        }
        records.push(rec);
        let (is_best, stop) = monitor.observe(&scores);
        if is_best {
            best = Some(TrainOutput {
                model: state.clone(),
                structure: step.structure.clone(),
                gpr,
                records: Vec::new(),
                predictions: predictions(&out.logits),
                best_epoch: epoch,
                wf1: scores.test_wf1,
                mf1: scores.test_mf1,
            });
        }
        z_prev = out.z;
        prev_structure = step.structure.a_star;
        lambdas = (
            decay_lambda(lambdas.0, cfg.decay, cfg.lambda1_floor),
            decay_lambda(lambdas.1, cfg.decay, cfg.lambda2_floor),
        );
        if stop {
            break;
        }
    }
    let mut out = best.expect("at least one epoch ran");
    out.records = records;
    Ok(out)
}
