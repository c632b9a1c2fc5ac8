//! Structure learning: multi-head cosine metric, conflict weighting, fusion
//! with the original graph and the graph regularizers, each with its
//! reverse-mode gradient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::numerics::Matrix;

/// Transformed rows with a norm below this compare as 0 to everything.
pub const ZERO_NORM: f64 = 1e-12;
/// Guard inside the connectivity log-barrier.
pub const CON_EPS: f64 = 1e-8;

/// `m` square heads over the concatenated node input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricLearner {
    pub heads: Vec<Matrix>,
}

impl MetricLearner {
    /// Heads initialized uniform in `±1/√d_in`.
    pub fn new(m: usize, input_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if m == 0 {
            return Err(PastelError::InvalidParams("head count must be positive".into()));
        }
        let bound = 1.0 / (input_dim.max(1) as f64).sqrt();
        let heads = (0..m)
            .map(|_| Matrix::from_fn(input_dim, input_dim, |_, _| rng.gen_range(-bound..=bound)))
            .collect();
        Ok(Self { heads })
    }

    pub fn m(&self) -> usize {
        self.heads.len()
    }

    pub fn input_dim(&self) -> usize {
        self.heads[0].rows()
    }
}

/// Intermediates of [`pairwise_metric_tape`].
#[derive(Debug, Clone)]
pub struct MetricTape {
    inputs: Matrix,
    /// Per head: unit-normalized transformed rows (zero rows when guarded).
    unit: Vec<Matrix>,
    /// Per head: row norms before normalization.
    norms: Vec<Vec<f64>>,
}

/// `s_ij = (1/m) Σ_h cos(W_h u_i, W_h u_j)`.
pub fn pairwise_metric(inputs: &Matrix, learner: &MetricLearner) -> Result<Matrix> {
    pairwise_metric_tape(inputs, learner).map(|(s, _)| s)
}

pub fn pairwise_metric_tape(inputs: &Matrix, learner: &MetricLearner) -> Result<(Matrix, MetricTape)> {
    if inputs.cols() != learner.input_dim() {
        return Err(PastelError::ShapeMismatch(format!(
            "metric input width {} vs head width {}",
            inputs.cols(),
            learner.input_dim()
        )));
    }
    let n = inputs.rows();
    let mut s = Matrix::zeros(n, n);
    let mut unit = Vec::with_capacity(learner.m());
    let mut norms = Vec::with_capacity(learner.m());
    let inv_m = 1.0 / learner.m() as f64;
    for w in &learner.heads {
        let mut y = inputs.matmul_t(w)?;
        let mut row_norms = Vec::with_capacity(n);
        for i in 0..n {
            let row = y.row_mut(i);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < ZERO_NORM {
                row.fill(0.0);
            } else {
                row.iter_mut().for_each(|x| *x /= norm);
            }
            row_norms.push(norm);
        }
        s.axpy(inv_m, &y.matmul_t(&y)?)?;
        unit.push(y);
        norms.push(row_norms);
    }
    Ok((
        s,
        MetricTape {
            inputs: inputs.clone(),
            unit,
            norms,
        },
    ))
}

/// Gradients w.r.t. every head and w.r.t. the inputs, given `d_s = ∂L/∂S`.
pub fn pairwise_metric_backward(
    tape: &MetricTape,
    learner: &MetricLearner,
    d_s: &Matrix,
) -> Result<(Vec<Matrix>, Matrix)> {
    let inv_m = 1.0 / learner.m() as f64;
    let d_sym = d_s.add(&d_s.transpose())?;
    let mut d_heads = Vec::with_capacity(learner.m());
    let mut d_inputs = Matrix::zeros(tape.inputs.rows(), tape.inputs.cols());
    for ((w, yhat), norms) in learner.heads.iter().zip(&tape.unit).zip(&tape.norms) {
        let d_yhat = d_sym.matmul(yhat)?.scale(inv_m);
        let mut d_y = d_yhat;
        for (i, &norm) in norms.iter().enumerate() {
            let u = yhat.row(i);
            let row = d_y.row_mut(i);
            if norm < ZERO_NORM {
                row.fill(0.0);
                continue;
            }
            let proj: f64 = row.iter().zip(u).map(|(a, b)| a * b).sum();
            for (r, &ui) in row.iter_mut().zip(u) {
                *r = (*r - ui * proj) / norm;
            }
        }
        d_heads.push(d_y.t_matmul(&tape.inputs)?);
        d_inputs.axpy(1.0, &d_y.matmul(w)?)?;
    }
    Ok((d_heads, d_inputs))
}

/// Elementwise conflict weighting `w ⊙ a_p`.
pub fn apply_conflict(a_p: &Matrix, w: &Matrix) -> Result<Matrix> {
    a_p.hadamard(w)
}

/// Fusion coefficients and similarity threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub a0: f64,
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PastelError::InvalidParams(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !self.a0.is_finite() {
            return Err(PastelError::InvalidParams(format!("a0 = {} is not finite", self.a0)));
        }
        Ok(())
    }
}

/// Row-normalized views kept for the fusion backward pass.
#[derive(Debug, Clone)]
pub struct FuseTape {
    params: FusionParams,
    f_n: Matrix,
    f_p: Matrix,
    rows_n: Vec<f64>,
    rows_p: Vec<f64>,
}

/// Keeps entries with `s ≥ a0` and `s > 0`, then L1-normalizes each row.
/// Rows with no surviving entry stay zero.
pub fn masked_row_normalize(s: &Matrix, a0: f64) -> (Matrix, Vec<f64>) {
    let mut f = s.map(|x| if x >= a0 && x > 0.0 { x } else { 0.0 });
    let mut sums = Vec::with_capacity(f.rows());
    for i in 0..f.rows() {
        let row = f.row_mut(i);
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|x| *x /= total);
        }
        sums.push(total);
    }
    (f, sums)
}

fn row_normalize_backward(f: &Matrix, sums: &[f64], d_f: &Matrix) -> Matrix {
    let mut d_r = Matrix::zeros(f.rows(), f.cols());
    for i in 0..f.rows() {
        if sums[i] <= 0.0 {
            continue;
        }
        let fi = f.row(i);
        let gi = d_f.row(i);
        let dot: f64 = fi.iter().zip(gi).map(|(a, b)| a * b).sum();
        for ((out, &fij), &gij) in d_r.row_mut(i).iter_mut().zip(fi).zip(gi) {
            // Masked entries are constants: only the surviving support moves.
            if fij > 0.0 {
                *out = (gij - dot) / sums[i];
            }
        }
    }
    d_r
}

/// `A* = sym(λ₁Â + (1−λ₁)(λ₂ f(S_N) + (1−λ₂) f(S̃_P)))` where `f` masks
/// similarities below `a0` and row-normalizes, and `sym(M) = (M + Mᵀ)/2`.
pub fn fuse(
    norm_adj: &Matrix,
    s_n: &Matrix,
    s_p_weighted: &Matrix,
    params: FusionParams,
) -> Result<(Matrix, FuseTape)> {
    params.validate()?;
    let n = norm_adj.rows();
    for (name, m) in [("feature view", s_n), ("position view", s_p_weighted)] {
        if m.shape() != (n, n) || norm_adj.cols() != n {
            return Err(PastelError::ShapeMismatch(format!(
                "{name} {:?} vs adjacency {:?}",
                m.shape(),
                norm_adj.shape()
            )));
        }
    }
    let FusionParams { lambda1, lambda2, .. } = params;
    let (f_n, rows_n) = masked_row_normalize(s_n, params.a0);
    let (f_p, rows_p) = masked_row_normalize(s_p_weighted, params.a0);
    let learned_n = (1.0 - lambda1) * lambda2;
    let learned_p = (1.0 - lambda1) * (1.0 - lambda2);
    let mut m = Matrix::zeros(n, n);
    for ((out, &a), (&x, &y)) in m
        .data_mut()
        .iter_mut()
        .zip(norm_adj.data())
        .zip(f_n.data().iter().zip(f_p.data()))
    {
        *out = lambda1 * a + (learned_n * x + learned_p * y);
    }
    let a_star = symmetrize(&m);
    Ok((
        a_star,
        FuseTape {
            params,
            f_n,
            f_p,
            rows_n,
            rows_p,
        },
    ))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    let n = m.rows();
    Matrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)]) / 2.0)
}

/// Gradients w.r.t. the feature-view similarities and the weighted
/// position-view similarities, given `g = ∂L/∂A*`.
pub fn fuse_backward(tape: &FuseTape, g: &Matrix) -> (Matrix, Matrix) {
    let d_m = symmetrize(g);
    let FusionParams { lambda1, lambda2, .. } = tape.params;
    let d_fn = d_m.scale((1.0 - lambda1) * lambda2);
    let d_fp = d_m.scale((1.0 - lambda1) * (1.0 - lambda2));
    (
        row_normalize_backward(&tape.f_n, &tape.rows_n, &d_fn),
        row_normalize_backward(&tape.f_p, &tape.rows_p, &d_fp),
    )
}

/// Smoothness, connectivity and sparsity of a structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerTerms {
    pub smooth: f64,
    pub con: f64,
    pub spar: f64,
}

/// `∂/∂A*` of each regularizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerGrads {
    pub smooth: Matrix,
    pub con: Matrix,
    pub spar: Matrix,
}

fn check_square(a: &Matrix, x: &Matrix) -> Result<()> {
    if a.rows() != a.cols() || a.rows() != x.rows() {
        return Err(PastelError::ShapeMismatch(format!(
            "structure {:?} vs features {:?}",
            a.shape(),
            x.shape()
        )));
    }
    Ok(())
}

/// `c_ij = ‖x_i‖² − x_i·x_j`, so that `tr(XᵀL*X) = Σ_ij A*_ij c_ij`. The
/// diagonal is exactly 0.
fn dirichlet_coefficients(x: &Matrix) -> Result<Matrix> {
    let sq: Vec<f64> = (0..x.rows())
        .map(|i| x.row(i).iter().map(|v| v * v).sum())
        .collect();
    let gram = x.matmul_t(x)?;
    Ok(Matrix::from_fn(x.rows(), x.rows(), |i, j| {
        if i == j {
            0.0
        } else {
            sq[i] - gram[(i, j)]
        }
    }))
}

/// `smooth = tr(XᵀL*X)/N²`, `con = (1/N) Σ log(A*1 + ε)`,
/// `spar = ‖A*‖²_F/N²`.
pub fn regularizers(a_star: &Matrix, x: &Matrix) -> Result<RegularizerTerms> {
    check_square(a_star, x)?;
    let n = a_star.rows() as f64;
    let coeff = dirichlet_coefficients(x)?;
    let dirichlet: f64 = a_star
        .data()
        .iter()
        .zip(coeff.data())
        .map(|(a, c)| a * c)
        .sum();
    let degrees = a_star.row_sums();
    Ok(RegularizerTerms {
        smooth: dirichlet / (n * n),
        con: degrees.iter().map(|d| (d + CON_EPS).ln()).sum::<f64>() / n,
        spar: a_star.frobenius_sq() / (n * n),
    })
}

pub fn regularizer_grads(a_star: &Matrix, x: &Matrix) -> Result<RegularizerGrads> {
    check_square(a_star, x)?;
    let size = a_star.rows();
    let n = size as f64;
    let smooth = dirichlet_coefficients(x)?.scale(1.0 / (n * n));
    let degrees = a_star.row_sums();
    let con = Matrix::from_fn(size, size, |i, _| 1.0 / (n * (degrees[i] + CON_EPS)));
    let spar = a_star.scale(2.0 / (n * n));
    Ok(RegularizerGrads { smooth, con, spar })
}

/// One epoch's learned structure and the inputs it was fused from.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedStructure {
    /// Feature-view similarities.
    pub a_n: Matrix,
    /// Position-view similarities before conflict weighting.
    pub a_p: Matrix,
    pub a_p_weighted: Matrix,
    pub a_star: Matrix,
    pub lambda1: f64,
    pub lambda2: f64,
    pub a0: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_check;
    use crate::seed;

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn self_similarity_and_orthogonality() {
        let learner = MetricLearner {
            heads: vec![Matrix::identity(2)],
        };
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0], vec![0.0, 0.0]]).unwrap();
        let s = pairwise_metric(&x, &learner).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(s[(0, 1)], 0.0);
        // Zero row compares as 0 with everything, itself included.
        assert_eq!(s.row(2), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn metric_symmetric() {
        let mut rng = seed::stream(1, "test");
        let learner = MetricLearner::new(3, 4, &mut rng).unwrap();
        let x = random(7, 4, &mut rng);
        let s = pairwise_metric(&x, &learner).unwrap();
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn metric_gradient() {
        let mut rng = seed::stream(2, "test");
        let learner = MetricLearner::new(2, 4, &mut rng).unwrap();
        let x = random(5, 4, &mut rng);
        let probe = random(5, 5, &mut rng);
        let loss = |s: &Matrix| s.hadamard(&probe).unwrap().sum();
        let (_, tape) = pairwise_metric_tape(&x, &learner).unwrap();
        let (d_heads, d_x) = pairwise_metric_backward(&tape, &learner, &probe).unwrap();

        let err = finite_diff_check(
            |v| loss(&pairwise_metric(&Matrix::from_vec(5, 4, v.to_vec()).unwrap(), &learner).unwrap()),
            x.data(),
            d_x.data(),
        );
        assert!(err < 1e-6, "inputs: {err}");
        for h in 0..2 {
            let err = finite_diff_check(
                |v| {
                    let mut l = learner.clone();
                    l.heads[h] = Matrix::from_vec(4, 4, v.to_vec()).unwrap();
                    loss(&pairwise_metric(&x, &l).unwrap())
                },
                learner.heads[h].data(),
                d_heads[h].data(),
            );
            assert!(err < 1e-6, "head {h}: {err}");
        }
    }

    #[test]
    fn conflict_weighting() {
        let mut rng = seed::stream(3, "test");
        let a = random(3, 3, &mut rng);
        assert_eq!(apply_conflict(&a, &Matrix::filled(3, 3, 1.0)).unwrap(), a);
        let mut w = Matrix::filled(3, 3, 1.0);
        w.row_mut(1).fill(0.0);
        assert_eq!(apply_conflict(&a, &w).unwrap().row(1), &[0.0; 3]);
        let w = random(3, 3, &mut rng);
        let out = apply_conflict(&a, &w).unwrap();
        assert_eq!(out[(2, 1)], a[(2, 1)] * w[(2, 1)]);
    }

    fn params(lambda1: f64, lambda2: f64, a0: f64) -> FusionParams {
        FusionParams { lambda1, lambda2, a0 }
    }

    #[test]
    fn fusion_endpoints() {
        let mut rng = seed::stream(4, "test");
        let adj = symmetrize(&random(4, 4, &mut rng).map(f64::abs));
        let s_n = random(4, 4, &mut rng);
        let s_p = random(4, 4, &mut rng);
        let (a, _) = fuse(&adj, &s_n, &s_p, params(1.0, 0.5, 0.2)).unwrap();
        assert_eq!(a, adj);
        let (a, _) = fuse(&adj, &s_n, &s_p, params(0.0, 1.0, 0.2)).unwrap();
        let (f, _) = masked_row_normalize(&s_n, 0.2);
        assert_eq!(a, symmetrize(&f));
    }

    #[test]
    fn fused_structure_is_symmetric_and_nonnegative() {
        let mut rng = seed::stream(5, "test");
        let adj = symmetrize(&random(6, 6, &mut rng).map(f64::abs));
        let (a, _) = fuse(
            &adj,
            &random(6, 6, &mut rng),
            &random(6, 6, &mut rng),
            params(0.3, 0.6, 0.1),
        )
        .unwrap();
        assert_eq!(a, a.transpose());
        assert!(a.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn masked_rows_sum_to_one() {
        let s = Matrix::from_rows(&[vec![0.9, 0.05, 0.3], vec![-1.0, 0.0, 0.01]]).unwrap();
        let (f, sums) = masked_row_normalize(&s, 0.1);
        assert!((f.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(f[(0, 1)], 0.0);
        assert_eq!(f.row(1), &[0.0; 3]);
        assert_eq!(sums[1], 0.0);
    }

    #[test]
    fn fusion_gradient() {
        let mut rng = seed::stream(6, "test");
        let n = 5;
        let adj = symmetrize(&random(n, n, &mut rng).map(f64::abs));
        // Entries kept well away from the mask threshold.
        let pick = |rng: &mut seed::StreamRng| {
            Matrix::from_fn(n, n, |_, _| {
                if rng.gen_bool(0.6) {
                    rng.gen_range(0.3..1.0)
                } else {
                    rng.gen_range(-1.0..0.0)
                }
            })
        };
        let s_n = pick(&mut rng);
        let s_p = pick(&mut rng);
        let probe = random(n, n, &mut rng);
        let p = params(0.4, 0.3, 0.2);
        let (_, tape) = fuse(&adj, &s_n, &s_p, p).unwrap();
        let (d_n, d_p) = fuse_backward(&tape, &probe);
        let loss = |a: &Matrix, b: &Matrix| {
            fuse(&adj, a, b, p).unwrap().0.hadamard(&probe).unwrap().sum()
        };
        let err = finite_diff_check(
            |v| loss(&Matrix::from_vec(n, n, v.to_vec()).unwrap(), &s_p),
            s_n.data(),
            d_n.data(),
        );
        assert!(err < 1e-6, "{err}");
        let err = finite_diff_check(
            |v| loss(&s_n, &Matrix::from_vec(n, n, v.to_vec()).unwrap()),
            s_p.data(),
            d_p.data(),
        );
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn regularizer_values() {
        let x = Matrix::filled(3, 2, 0.7);
        let mut rng = seed::stream(7, "test");
        let a = random(3, 3, &mut rng).map(f64::abs);
        assert!(regularizers(&a, &x).unwrap().smooth.abs() < 1e-15);
        let r = regularizers(&Matrix::identity(2), &Matrix::zeros(2, 1)).unwrap();
        assert_eq!(r.spar, 0.5);
    }

    #[test]
    fn smoothness_matches_pairwise_form() {
        let mut rng = seed::stream(8, "test");
        let a = symmetrize(&random(6, 6, &mut rng).map(f64::abs));
        let x = random(6, 3, &mut rng);
        let mut pairwise = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(p, q)| (p - q).powi(2)).sum();
                pairwise += a[(i, j)] * d;
            }
        }
        let expect = 0.5 * pairwise / 36.0;
        assert!((regularizers(&a, &x).unwrap().smooth - expect).abs() < 1e-12);
    }

    #[test]
    fn regularizer_gradients() {
        let mut rng = seed::stream(9, "test");
        let n = 5;
        let a = random(n, n, &mut rng).map(|v| v.abs() + 0.1);
        let x = random(n, 3, &mut rng);
        let g = regularizer_grads(&a, &x).unwrap();
        for (name, grad) in [("smooth", &g.smooth), ("con", &g.con), ("spar", &g.spar)] {
            let err = finite_diff_check(
                |v| {
                    let r = regularizers(&Matrix::from_vec(n, n, v.to_vec()).unwrap(), &x).unwrap();
                    match name {
                        "smooth" => r.smooth,
                        "con" => r.con,
                        _ => r.spar,
                    }
                },
                a.data(),
                grad.data(),
            );
            assert!(err < 1e-6, "{name}: {err}");
        }
    }

    #[test]
    fn connectivity_grows_with_degree() {
        let mut rng = seed::stream(10, "test");
        let a = random(4, 4, &mut rng).map(f64::abs);
        let x = Matrix::zeros(4, 1);
        let more = a.map(|v| v + 0.1);
        assert!(regularizers(&more, &x).unwrap().con > regularizers(&a, &x).unwrap().con);
    }
}
