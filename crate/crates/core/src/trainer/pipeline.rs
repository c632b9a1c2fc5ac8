//! One forward/backward pass of the full structure + representation model.

use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::gnn::{self, GcnModel};
use crate::numerics::Matrix;
use crate::position::{encode, encode_backward, PositionEncoder, PositionProfile};
use crate::seed::StreamRng;
use crate::structure::{
    apply_conflict, fuse, fuse_backward, pairwise_metric_backward, pairwise_metric_tape,
    regularizer_grads, regularizers, FusionParams, LearnedStructure, MetricLearner,
};

/// Every trainable parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub gcn: GcnModel,
    pub encoder: PositionEncoder,
    /// Metric over `x_i ‖ h^{p0}_i`.
    pub metric_n: MetricLearner,
    /// Metric over `z_i ‖ h^p_i`.
    pub metric_p: MetricLearner,
}

impl ModelState {
    /// Parameters in optimizer order.
    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let mut out: Vec<(&'static str, &mut Matrix)> = vec![
            ("gcn.w1", &mut self.gcn.w1),
            ("gcn.w2", &mut self.gcn.w2),
            ("gcn.wc", &mut self.gcn.wc),
            ("position.w_phi", &mut self.encoder.w_phi),
        ];
        out.extend(self.metric_n.heads.iter_mut().map(|h| ("metric_n.head", h)));
        out.extend(self.metric_p.heads.iter_mut().map(|h| ("metric_p.head", h)));
        out
    }

    pub fn params(&self) -> Vec<&Matrix> {
        let mut out = vec![&self.gcn.w1, &self.gcn.w2, &self.gcn.wc, &self.encoder.w_phi];
        out.extend(&self.metric_n.heads);
        out.extend(&self.metric_p.heads);
        out
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.params().iter().map(|m| m.shape()).collect()
    }

    /// All parameters flattened in optimizer order.
    pub fn flatten(&self) -> Vec<f64> {
        self.params().iter().flat_map(|m| m.data().iter().copied()).collect()
    }

    /// Inverse of [`ModelState::flatten`].
    pub fn set_flat(&mut self, values: &[f64]) {
        let mut offset = 0;
        for (_, m) in self.params_mut() {
            let len = m.data().len();
            m.data_mut().copy_from_slice(&values[offset..offset + len]);
            offset += len;
        }
        assert_eq!(offset, values.len(), "flat parameter length");
    }
}

/// Per-epoch constants of the pipeline.
#[derive(Debug, Clone, Copy)]
pub struct EpochInputs<'a> {
    pub x: &'a Matrix,
    /// Normalized original adjacency.
    pub norm_adj: &'a Matrix,
    /// Profile on the current structure.
    pub profile: &'a PositionProfile,
    /// Profile on the original graph.
    pub profile0: &'a PositionProfile,
    /// Representations from the previous epoch.
    pub z_prev: &'a Matrix,
    pub conflict_w: &'a Matrix,
    pub labeled: &'a [(usize, usize)],
    pub fusion: FusionParams,
    /// Smoothness, connectivity and sparsity coefficients.
    pub betas: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub cls: f64,
    pub smooth: f64,
    pub con: f64,
    pub spar: f64,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub terms: LossTerms,
    /// Gradients in [`ModelState::params_mut`] order.
    pub grads: Vec<Matrix>,
    pub structure: LearnedStructure,
    pub logits: Matrix,
}

struct Forward {
    terms: LossTerms,
    structure: LearnedStructure,
    logits: Matrix,
    d_logits: Matrix,
    gcn_tape: gnn::ForwardTape,
    fuse_tape: crate::structure::FuseTape,
    metric_n_tape: crate::structure::MetricTape,
    metric_p_tape: crate::structure::MetricTape,
}

fn run_forward(
    state: &ModelState,
    inp: &EpochInputs,
    dropout_rng: Option<&mut StreamRng>,
) -> Result<Forward> {
    let h_p = encode(inp.profile, &state.encoder)?;
    let h_p0 = encode(inp.profile0, &state.encoder)?;
    let (s_p, metric_p_tape) = pairwise_metric_tape(&inp.z_prev.hcat(&h_p)?, &state.metric_p)?;
    let s_p_weighted = apply_conflict(&s_p, inp.conflict_w)?;
    let (s_n, metric_n_tape) = pairwise_metric_tape(&inp.x.hcat(&h_p0)?, &state.metric_n)?;
    let (a_star, fuse_tape) = fuse(inp.norm_adj, &s_n, &s_p_weighted, inp.fusion)?;

    let out = gnn::forward(&state.gcn, &a_star, inp.x, dropout_rng)?;
    let (cls, d_logits) = gnn::cross_entropy_on(&out.logits, inp.labeled)?;
    let reg = regularizers(&a_star, inp.x)?;
    let [b1, b2, b3] = inp.betas;
    let total = cls + b1 * reg.smooth + b2 * reg.con + b3 * reg.spar;
    Ok(Forward {
        terms: LossTerms {
            total,
            cls,
            smooth: reg.smooth,
            con: reg.con,
            spar: reg.spar,
        },
        structure: LearnedStructure {
            a_n: s_n,
            a_p: s_p,
            a_p_weighted: s_p_weighted,
            a_star,
            lambda1: inp.fusion.lambda1,
            lambda2: inp.fusion.lambda2,
            a0: inp.fusion.a0,
        },
        logits: out.logits,
        d_logits,
        gcn_tape: out.tape,
        fuse_tape,
        metric_n_tape,
        metric_p_tape,
    })
}

/// Total loss only; used by gradient checks.
pub fn pipeline_loss(
    state: &ModelState,
    inp: &EpochInputs,
    dropout_rng: Option<&mut StreamRng>,
) -> Result<LossTerms> {
    run_forward(state, inp, dropout_rng).map(|f| f.terms)
}

/// Forward pass plus exact gradients of the total loss w.r.t. every
/// parameter. Profiles, conflict weights, `z_prev` and the mask support are
/// constants.
pub fn pipeline_step(
    state: &ModelState,
    inp: &EpochInputs,
    dropout_rng: Option<&mut StreamRng>,
) -> Result<StepResult> {
    let mut f = run_forward(state, inp, dropout_rng)?;
    if !f.terms.total.is_finite() {
        return Err(PastelError::NonFiniteGradient("total loss".into()));
    }
    let g = gnn::backward(&mut f.gcn_tape, &state.gcn, &f.d_logits)?;
    let mut d_a = g.a_star;
    let reg = regularizer_grads(&f.structure.a_star, inp.x)?;
    let [b1, b2, b3] = inp.betas;
    for (beta, grad) in [(b1, &reg.smooth), (b2, &reg.con), (b3, &reg.spar)] {
        if beta != 0.0 {
            d_a.axpy(beta, grad)?;
        }
    }
    let (d_sn, d_spw) = fuse_backward(&f.fuse_tape, &d_a);
    let d_sp = d_spw.hadamard(inp.conflict_w)?;
    let (d_heads_n, d_in_n) = pairwise_metric_backward(&f.metric_n_tape, &state.metric_n, &d_sn)?;
    let (d_heads_p, d_in_p) = pairwise_metric_backward(&f.metric_p_tape, &state.metric_p, &d_sp)?;
    let d_hp0 = d_in_n.col_slice(inp.x.cols(), d_in_n.cols());
    let d_hp = d_in_p.col_slice(inp.z_prev.cols(), d_in_p.cols());
    let mut d_phi = encode_backward(inp.profile0, &d_hp0)?;
    d_phi.axpy(1.0, &encode_backward(inp.profile, &d_hp)?)?;

    let mut grads = vec![g.w1, g.w2, g.wc, d_phi];
    grads.extend(d_heads_n);
    grads.extend(d_heads_p);
    Ok(StepResult {
        terms: f.terms,
        grads,
        structure: f.structure,
        logits: f.logits,
    })
}

/// Builds a fresh model: GCN from the `"init/gcn"` stream, structure
/// learners and encoder from `"init/metric"`.
pub fn init_state(
    seed: u64,
    input_dim: usize,
    hidden: usize,
    classes: usize,
    heads: usize,
    dropout: f64,
) -> Result<ModelState> {
    let gcn = init_gcn(seed, input_dim, hidden, classes, dropout)?;
    let mut rng = crate::seed::stream(seed, "init/metric");
    let encoder = PositionEncoder::new(input_dim, classes, &mut rng);
    let metric_n = MetricLearner::new(heads, 2 * input_dim, &mut rng)?;
    let metric_p = MetricLearner::new(heads, hidden + input_dim, &mut rng)?;
    Ok(ModelState {
        gcn,
        encoder,
        metric_n,
        metric_p,
    })
}

pub fn init_gcn(
    seed: u64,
    input_dim: usize,
    hidden: usize,
    classes: usize,
    dropout: f64,
) -> Result<GcnModel> {
    let mut rng = crate::seed::stream(seed, "init/gcn");
    GcnModel::new(input_dim, hidden, hidden, classes, dropout, &mut rng)
}

