//! Two-layer GCN encoder with a linear classifier and hand-derived
//! reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::graph::LabelSplit;
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    /// `d₀ × h`.
    pub w1: Matrix,
    /// `h × d`.
    pub w2: Matrix,
    /// `d × C`.
    pub wc: Matrix,
    pub dropout: f64,
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

impl GcnModel {
    /// Glorot-uniform weights.
    pub fn new(
        input_dim: usize,
        hidden: usize,
        out_dim: usize,
        classes: usize,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(PastelError::InvalidParams(format!("dropout {dropout} outside [0, 1)")));
        }
        Ok(Self {
            w1: glorot(input_dim, hidden, rng),
            w2: glorot(hidden, out_dim, rng),
            wc: glorot(out_dim, classes, rng),
            dropout,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.w2.cols()
    }
}

/// Intermediates of one forward pass, usable by exactly one backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    inner: Option<TapeData>,
}

#[derive(Debug, Clone)]
struct TapeData {
    a_star: Matrix,
    x: Matrix,
    xw1: Matrix,
    /// Pre-activation of the hidden layer.
    h1: Matrix,
    /// Dropout multipliers (0 or `1/(1−p)`), absent in eval mode.
    keep: Option<Vec<f64>>,
    /// Hidden layer after ReLU and dropout.
    hidden: Matrix,
    hw2: Matrix,
    z: Matrix,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub z: Matrix,
    pub logits: Matrix,
    pub tape: ForwardTape,
}

/// Gradients of every GCN weight and of the propagation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnGrads {
    pub w1: Matrix,
    pub w2: Matrix,
    pub wc: Matrix,
    pub a_star: Matrix,
}

/// `Z = A*·drop(ReLU(A*·X·W₁))·W₂`, `logits = Z·W_c`. Passing an RNG selects
/// train mode (dropout on the hidden layer).
pub fn forward<R: Rng>(
    model: &GcnModel,
    a_star: &Matrix,
    x: &Matrix,
    dropout_rng: Option<&mut R>,
) -> Result<ForwardOutput> {
    let n = x.rows();
    if a_star.shape() != (n, n) || x.cols() != model.input_dim() {
        return Err(PastelError::ShapeMismatch(format!(
            "propagation {:?}, features {:?}, layer-1 {:?}",
            a_star.shape(),
            x.shape(),
            model.w1.shape()
        )));
    }
    let xw1 = x.matmul(&model.w1)?;
    let h1 = a_star.matmul(&xw1)?;
    let mut hidden = h1.map(|v| v.max(0.0));
    let keep = match dropout_rng {
        Some(rng) if model.dropout > 0.0 => {
            let scale = 1.0 / (1.0 - model.dropout);
            let keep: Vec<f64> = (0..hidden.data().len())
                .map(|_| if rng.gen::<f64>() < model.dropout { 0.0 } else { scale })
                .collect();
            hidden
                .data_mut()
                .iter_mut()
                .zip(&keep)
                .for_each(|(h, k)| *h *= k);
            Some(keep)
        }
        _ => None,
    };
    let hw2 = hidden.matmul(&model.w2)?;
    let z = a_star.matmul(&hw2)?;
    let logits = z.matmul(&model.wc)?;
    Ok(ForwardOutput {
        z: z.clone(),
        logits,
        tape: ForwardTape {
            inner: Some(TapeData {
                a_star: a_star.clone(),
                x: x.clone(),
                xw1,
                h1,
                keep,
                hidden,
                hw2,
                z,
            }),
        },
    })
}

/// Eval-mode forward.
pub fn forward_eval(model: &GcnModel, a_star: &Matrix, x: &Matrix) -> Result<ForwardOutput> {
    forward::<crate::seed::StreamRng>(model, a_star, x, None)
}

/// Consumes the tape and returns gradients given `∂L/∂logits`.
pub fn backward(tape: &mut ForwardTape, model: &GcnModel, d_logits: &Matrix) -> Result<GcnGrads> {
    let t = tape.inner.take().ok_or(PastelError::ConsumedTape)?;
    let wc = t.z.t_matmul(d_logits)?;
    let d_z = d_logits.matmul_t(&model.wc)?;
    let mut d_a = d_z.matmul_t(&t.hw2)?;
    let d_hw2 = t.a_star.t_matmul(&d_z)?;
    let w2 = t.hidden.t_matmul(&d_hw2)?;
    let mut d_h1 = d_hw2.matmul_t(&model.w2)?;
    for (k, (g, &pre)) in d_h1.data_mut().iter_mut().zip(t.h1.data()).enumerate() {
        let keep = t.keep.as_ref().map_or(1.0, |m| m[k]);
        *g = if pre > 0.0 { *g * keep } else { 0.0 };
    }
    d_a.axpy(1.0, &d_h1.matmul_t(&t.xw1)?)?;
    let d_xw1 = t.a_star.t_matmul(&d_h1)?;
    let w1 = t.x.t_matmul(&d_xw1)?;
    Ok(GcnGrads {
        w1,
        w2,
        wc,
        a_star: d_a,
    })
}

/// Mean negative log-softmax of the true class over `nodes` and its
/// gradient w.r.t. the logits.
pub fn cross_entropy_on(logits: &Matrix, nodes: &[(usize, usize)]) -> Result<(f64, Matrix)> {
    if nodes.is_empty() {
        return Err(PastelError::NoLabeledNodes);
    }
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let scale = 1.0 / nodes.len() as f64;
    let mut loss = 0.0;
    for &(v, c) in nodes {
        let row = logits.row(v);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&l| (l - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[c];
        for (g, &l) in grad.row_mut(v).iter_mut().zip(row) {
            *g += (l - log_z).exp() * scale;
        }
        grad[(v, c)] -= scale;
    }
    Ok((loss * scale, grad))
}

/// Cross-entropy over the labeled nodes of a split.
pub fn cross_entropy(logits: &Matrix, split: &LabelSplit) -> Result<(f64, Matrix)> {
    cross_entropy_on(logits, &split.labeled())
}

/// Most likely class of every node (lowest index on ties).
pub fn predictions(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            logits
                .row(i)
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (c, &l)| if l > best.1 { (c, l) } else { best })
                .0
        })
        .collect()
}
