use crate::error::{PastelError, Result};
use crate::numerics::Matrix;

/// Pivots below this magnitude are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Solves `A·X = B` by LU factorisation with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(PastelError::ShapeMismatch(format!(
            "solve_linear needs a square matrix, got {:?}",
            a.shape()
        )));
    }
    if b.rows() != n {
        return Err(PastelError::ShapeMismatch(format!(
            "right-hand side has {} rows, system has {n}",
            b.rows()
        )));
    }
    let k = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();

    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, lu[(r, col)]))
            .fold((col, 0.0_f64), |best, (r, v)| {
                if v.abs() > best.1.abs() {
                    (r, v)
                } else {
                    best
                }
            });
        if pivot.abs() <= PIVOT_TOLERANCE {
            return Err(PastelError::SingularMatrix { column: col, pivot });
        }
        if pivot_row != col {
            swap_rows(&mut lu, col, pivot_row);
            swap_rows(&mut x, col, pivot_row);
        }
        let (upper, lower) = lu.data_mut().split_at_mut((col + 1) * n);
        let pivot_slice = &upper[col * n..(col + 1) * n];
        let (xu, xl) = x.data_mut().split_at_mut((col + 1) * k);
        let x_pivot = &xu[col * k..(col + 1) * k];
        for (r, row) in lower.chunks_mut(n).enumerate() {
            let factor = row[col] / pivot;
            if factor == 0.0 {
                continue;
            }
            row[col] = 0.0;
            for (dst, src) in row[col + 1..].iter_mut().zip(&pivot_slice[col + 1..]) {
                *dst -= factor * src;
            }
            let xrow = &mut xl[r * k..(r + 1) * k];
            for (dst, src) in xrow.iter_mut().zip(x_pivot) {
                *dst -= factor * src;
            }
        }
    }

    for col in (0..n).rev() {
        let pivot = lu[(col, col)];
        for j in 0..k {
            let mut acc = x[(col, j)];
            for c in col + 1..n {
                acc -= lu[(col, c)] * x[(c, j)];
            }
            x[(col, j)] = acc / pivot;
        }
    }
    Ok(x)
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    let cols = m.cols();
    let (lo, hi) = (a.min(b), a.max(b));
    let (first, second) = m.data_mut().split_at_mut(hi * cols);
    first[lo * cols..(lo + 1) * cols].swap_with_slice(&mut second[..cols]);
}
