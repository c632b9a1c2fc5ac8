/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Central-difference estimate of `∇f` at `params`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, params: &[f64]) -> Vec<f64> {
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let plus = f(&probe);
            probe[i] = orig - FD_STEP;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Maximum relative error `|numeric − analytic| / (|analytic| + 1e-8)` over
/// all coordinates. Never fails; a length mismatch reports infinity.
pub fn finite_diff_check(f: impl FnMut(&[f64]) -> f64, params: &[f64], analytic: &[f64]) -> f64 {
    if params.len() != analytic.len() {
        return f64::INFINITY;
    }
    central_difference(f, params)
        .iter()
        .zip(analytic)
        .map(|(n, a)| (n - a).abs() / (a.abs() + 1e-8))
        .fold(0.0, f64::max)
}
