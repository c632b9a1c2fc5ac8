use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_baseline, BaselineKind, TrainConfig};
use crate::error::{PastelError, Result};
use crate::graph::{generate_sbm, sample_split, Graph, SbmParams};
use crate::metrics::imbalance_summary;

/// One point of an accuracy-versus-imbalance scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub rc: f64,
    pub sc: f64,
    /// Test weighted F1 of the plain GCN.
    pub wf1: f64,
    /// Seed of the labeled-set draw.
    pub seed: u64,
}

/// Samples a fresh labeled set per trial (split seed `cfg.seed + t`),
/// measures RC/SC on the original graph and trains a plain GCN on it. The
/// model seed stays `cfg.seed` so only the label placement varies.
pub fn label_placement_study(
    g: &Graph,
    labels: &[usize],
    trials: usize,
    cfg: &TrainConfig,
) -> Result<Vec<StudyRecord>> {
    if trials < 2 {
        return Err(PastelError::InvalidParams(format!("{trials} trials; need at least 2")));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.seed.wrapping_add(t);
            let split = sample_split(labels, cfg.per_class, seed)?;
            let report = imbalance_summary(g, &split)?;
            let run = run_baseline(BaselineKind::PlainGcn, g, &split, cfg)?;
            Ok(StudyRecord {
                rc: report.rc,
                sc: report.sc,
                wf1: run.wf1,
                seed,
            })
        })
        .collect()
}

/// Sweeps the between-community probability over `qs` with the graph seed,
/// labeled set and model seed all fixed at `cfg.seed`.
pub fn structure_study(base: &SbmParams, qs: &[f64], cfg: &TrainConfig) -> Result<Vec<StudyRecord>> {
    if qs.is_empty() {
        return Err(PastelError::InvalidParams("empty q list".into()));
    }
    qs.par_iter()
        .map(|&q| {
            let params = SbmParams { q, ..base.clone() };
            let (g, labels) = generate_sbm(&params, cfg.seed)?;
            let split = sample_split(&labels, cfg.per_class, cfg.seed)?;
            let report = imbalance_summary(&g, &split)?;
            let run = run_baseline(BaselineKind::PlainGcn, &g, &split, cfg)?;
            Ok(StudyRecord {
                rc: report.rc,
                sc: report.sc,
                wf1: run.wf1,
                seed: cfg.seed,
            })
        })
        .collect()
}
