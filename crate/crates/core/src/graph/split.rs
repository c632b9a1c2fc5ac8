use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::seed;

/// Labeled/unlabeled partition of the nodes.
///
/// `labels` holds the ground-truth class of every node whose class is known;
/// only the members of `anchor_sets` are visible to training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSplit {
    labels: Vec<Option<usize>>,
    num_classes: usize,
    anchor_sets: Vec<Vec<usize>>,
    unlabeled: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

impl LabelSplit {
    /// Split with explicit per-class anchor sets. Every unlabeled node with a
    /// known class goes to the test mask; the validation mask is empty.
    pub fn from_anchors(labels: Vec<Option<usize>>, anchor_sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = labels.len();
        let num_classes = anchor_sets.len();
        let mut labeled = vec![false; n];
        for (c, set) in anchor_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(PastelError::EmptyAnchorSet(c));
            }
            for &v in set {
                if v >= n {
                    return Err(PastelError::InconsistentNodeCount(format!(
                        "anchor {v} outside 0..{n}"
                    )));
                }
                if labeled[v] {
                    return Err(PastelError::InvalidParams(format!(
                        "node {v} appears in more than one anchor slot"
                    )));
                }
                if labels[v] != Some(c) {
                    return Err(PastelError::InvalidParams(format!(
                        "anchor {v} of class {c} has label {:?}",
                        labels[v]
                    )));
                }
                labeled[v] = true;
            }
        }
        if let Some(bad) = labels.iter().flatten().find(|&&c| c >= num_classes) {
            return Err(PastelError::InvalidParams(format!(
                "label {bad} outside 0..{num_classes}"
            )));
        }
        let unlabeled: Vec<usize> = (0..n).filter(|&v| !labeled[v]).collect();
        let test = unlabeled
            .iter()
            .copied()
            .filter(|&v| labels[v].is_some())
            .collect();
        Ok(Self {
            labels,
            num_classes,
            anchor_sets,
            unlabeled,
            val: Vec::new(),
            test,
        })
    }

    /// Moves a seeded `val_fraction` of the evaluable unlabeled nodes into
    /// the validation mask; the rest form the test mask.
    pub fn with_validation(mut self, val_fraction: f64, seed: u64) -> Self {
        let mut pool: Vec<usize> = self
            .unlabeled
            .iter()
            .copied()
            .filter(|&v| self.labels[v].is_some())
            .collect();
        pool.shuffle(&mut seed::stream(seed, "split-eval"));
        let n_val = ((pool.len() as f64) * val_fraction).round() as usize;
        let mut val = pool[..n_val].to_vec();
        let mut test = pool[n_val..].to_vec();
        val.sort_unstable();
        test.sort_unstable();
        self.val = val;
        self.test = test;
        self
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    /// Labeled nodes of class `c`.
    pub fn anchors(&self, c: usize) -> &[usize] {
        &self.anchor_sets[c]
    }

    pub fn anchor_sets(&self) -> &[Vec<usize>] {
        &self.anchor_sets
    }

    /// All labeled nodes with their class, ordered by class then id.
    pub fn labeled(&self) -> Vec<(usize, usize)> {
        self.anchor_sets
            .iter()
            .enumerate()
            .flat_map(|(c, s)| s.iter().map(move |&v| (v, c)))
            .collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.anchor_sets.iter().map(Vec::len).sum()
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn val(&self) -> &[usize] {
        &self.val
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    /// Same split with node ids relabelled by `perm` (old id → new id).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut labels = vec![None; self.n()];
        for (old, &new) in perm.iter().enumerate() {
            labels[new] = self.labels[old];
        }
        let map = |v: &Vec<usize>| {
            let mut out: Vec<usize> = v.iter().map(|&x| perm[x]).collect();
            out.sort_unstable();
            out
        };
        Self {
            labels,
            num_classes: self.num_classes,
            anchor_sets: self.anchor_sets.iter().map(map).collect(),
            unlabeled: map(&self.unlabeled),
            val: map(&self.val),
            test: map(&self.test),
        }
    }
}

/// Samples `per_class` anchors uniformly without replacement from every
/// class; remaining known-class nodes are split 1:9 into validation and test.
pub fn sample_split(labels: &[usize], per_class: usize, seed: u64) -> Result<LabelSplit> {
    let known: Vec<Option<usize>> = labels.iter().map(|&c| Some(c)).collect();
    sample_split_from(&known, per_class, seed)
}

/// [`sample_split`] for partially labeled graphs: nodes without a label are
/// never anchors and never evaluated.
pub fn sample_split_from(labels: &[Option<usize>], per_class: usize, seed: u64) -> Result<LabelSplit> {
    if per_class == 0 {
        return Err(PastelError::InvalidParams("per_class must be positive".into()));
    }
    let num_classes = labels.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut members = vec![Vec::new(); num_classes];
    for (v, c) in labels.iter().enumerate() {
        if let Some(c) = *c {
            members[c].push(v);
        }
    }
    let mut rng = seed::stream(seed, "split");
    let mut anchor_sets = Vec::with_capacity(num_classes);
    for (class, pool) in members.iter().enumerate() {
        if pool.len() < per_class {
            return Err(PastelError::InsufficientClassMembers {
                class,
                available: pool.len(),
                requested: per_class,
            });
        }
        let mut chosen: Vec<usize> = pool
            .choose_multiple(&mut rng, per_class)
            .copied()
            .collect();
        chosen.sort_unstable();
        anchor_sets.push(chosen);
    }
    let split = LabelSplit::from_anchors(labels.to_vec(), anchor_sets)?;
    Ok(split.with_validation(0.1, seed))
}
