use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::graph::Graph;
use crate::numerics::Matrix;
use crate::seed;

/// Stochastic block model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n: usize,
    /// Number of communities.
    pub c: usize,
    /// Within-community edge probability.
    pub p: f64,
    /// Between-community edge probability.
    pub q: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to the one-hot signal.
    pub feature_noise: f64,
}

impl SbmParams {
    pub fn new(n: usize, c: usize, p: f64, q: f64) -> Self {
        Self {
            n,
            c,
            p,
            q,
            feature_dim: c,
            feature_noise: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PastelError::InvalidParams(m));
        if self.c == 0 {
            return fail("community count must be positive".into());
        }
        if self.n < self.c {
            return fail(format!("n = {} is below c = {}", self.n, self.c));
        }
        if !(0.0..=1.0).contains(&self.p) || !(0.0..=1.0).contains(&self.q) {
            return fail(format!("p = {} and q = {} must lie in [0, 1]", self.p, self.q));
        }
        if self.q > self.p {
            return fail(format!("q = {} exceeds p = {}", self.q, self.p));
        }
        if self.feature_dim < self.c {
            return fail(format!(
                "feature_dim = {} cannot hold a {}-way one-hot signal",
                self.feature_dim, self.c
            ));
        }
        if !self.feature_noise.is_finite() || self.feature_noise < 0.0 {
            return fail(format!("feature_noise = {} is invalid", self.feature_noise));
        }
        Ok(())
    }

    /// Community of every node: blocks of `⌊n/c⌋`, the first `n mod c`
    /// blocks one larger.
    pub fn communities(&self) -> Vec<usize> {
        let base = self.n / self.c;
        let extra = self.n % self.c;
        (0..self.c)
            .flat_map(|k| std::iter::repeat_n(k, base + usize::from(k < extra)))
            .collect()
    }
}

/// Samples an SBM graph and returns it with its ground-truth communities.
pub fn generate_sbm(params: &SbmParams, seed: u64) -> Result<(Graph, Vec<usize>)> {
    params.validate()?;
    let n = params.n;
    let labels = params.communities();
    let mut rng = seed::stream(seed, "sbm");

    let mut adjacency = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let prob = if labels[i] == labels[j] {
                params.p
            } else {
                params.q
            };
            if rng.gen::<f64>() < prob {
                adjacency[(i, j)] = 1.0;
                adjacency[(j, i)] = 1.0;
            }
        }
    }

    let mut features = Matrix::zeros(n, params.feature_dim);
    for i in 0..n {
        for (k, x) in features.row_mut(i).iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            *x = params.feature_noise * noise + if k == labels[i] { 1.0 } else { 0.0 };
        }
    }
    Ok((Graph::new(adjacency, features)?, labels))
}
