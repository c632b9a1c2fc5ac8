use crate::error::{PastelError, Result};

/// Weighted and macro F1 of `predictions` over `mask`, scoring classes that
/// occur in the truth or the predictions of the masked nodes.
pub fn f1_scores(
    predictions: &[usize],
    truth: &[Option<usize>],
    mask: &[usize],
    num_classes: usize,
) -> Result<(f64, f64)> {
    let nodes: Vec<(usize, usize)> = mask
        .iter()
        .filter_map(|&v| truth[v].map(|t| (predictions[v], t)))
        .collect();
    if nodes.is_empty() {
        return Err(PastelError::EmptyMask);
    }
    let classes = num_classes
        .max(nodes.iter().map(|&(p, t)| p.max(t) + 1).max().unwrap_or(0));
    let mut tp = vec![0usize; classes];
    let mut predicted = vec![0usize; classes];
    let mut support = vec![0usize; classes];
    for &(p, t) in &nodes {
        predicted[p] += 1;
        support[t] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let mut weighted = 0.0;
    let mut macro_sum = 0.0;
    let mut present = 0usize;
    for c in 0..classes {
        if support[c] == 0 && predicted[c] == 0 {
            continue;
        }
        present += 1;
        let denom = predicted[c] + support[c];
        let f1 = 2.0 * tp[c] as f64 / denom as f64;
        macro_sum += f1;
        weighted += f1 * support[c] as f64;
    }
    Ok((weighted / nodes.len() as f64, macro_sum / present as f64))
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman needs paired samples");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let r = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = r;
        }
        start = end;
    }
    ranks
}
