//! k-fold and reversed k-fold partitions over authors.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::seeding::derive_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    /// Each fold is tested once and the other k-1 folds train.
    Kfold,
    /// Each fold trains once and the other k-1 folds are tested.
    KfoldReverse,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldPlan {
    pub scheme: FoldScheme,
    pub k: usize,
    pub seed: u64,
    /// Keep class proportions equal across folds when labels are given.
    pub stratify: bool,
}

impl Default for FoldPlan {
    fn default() -> Self {
        Self {
            scheme: FoldScheme::Kfold,
            k: 10,
            seed: 0,
            stratify: true,
        }
    }
}

impl FoldPlan {
    pub fn kfold(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            ..Self::default()
        }
    }

    pub fn kfold_reverse(k: usize, seed: u64) -> Self {
        Self {
            scheme: FoldScheme::KfoldReverse,
            k,
            seed,
            ..Self::default()
        }
    }
}

/// Indices into the author list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSet {
    pub folds: Vec<Fold>,
    /// Fold id (0..k) of every author.
    pub assignment: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Shuffles authors (within each class when stratifying) and deals them
/// round-robin into `k` groups, so group sizes differ by at most one.
pub fn make_folds(
    n_authors: usize,
    labels: Option<&[usize]>,
    plan: &FoldPlan,
) -> Result<FoldSet, EvalError> {
    if plan.k < 2 {
        return Err(EvalError::InvalidPlan(format!(
            "k must be at least 2, got {}",
            plan.k
        )));
    }
    if n_authors < plan.k {
        return Err(EvalError::InvalidPlan(format!(
            "{n_authors} authors cannot fill {} folds",
            plan.k
        )));
    }
    if let Some(l) = labels {
        if l.len() != n_authors {
            return Err(EvalError::LengthMismatch {
                left: n_authors,
                right: l.len(),
            });
        }
    }
    let mut rng = derive_rng(plan.seed, "folds");
    let mut order: Vec<usize> = (0..n_authors).collect();
    match labels {
        Some(l) if plan.stratify => {
            let n_classes = l.iter().max().map_or(0, |m| m + 1);
            let mut by_class = vec![Vec::new(); n_classes];
            for (i, &c) in l.iter().enumerate() {
                by_class[c].push(i);
            }
            order.clear();
            for group in &mut by_class {
                group.shuffle(&mut rng);
                order.extend_from_slice(group);
            }
        }
        _ => order.shuffle(&mut rng),
    }
    let mut assignment = vec![0; n_authors];
    for (pos, &author) in order.iter().enumerate() {
        assignment[author] = pos % plan.k;
    }
    let folds: Vec<Fold> = (0..plan.k)
        .map(|f| {
            let (inside, outside): (Vec<usize>, Vec<usize>) =
                (0..n_authors).partition(|&i| assignment[i] == f);
            match plan.scheme {
                FoldScheme::Kfold => Fold {
                    train: outside,
                    test: inside,
                },
                FoldScheme::KfoldReverse => Fold {
                    train: inside,
                    test: outside,
                },
            }
        })
        .collect();

    let mut warnings = Vec::new();
    if let Some(l) = labels {
        let n_classes = l.iter().max().map_or(0, |m| m + 1);
        for (f, fold) in folds.iter().enumerate() {
            let mut seen = vec![false; n_classes];
            fold.train.iter().for_each(|&i| seen[l[i]] = true);
            for (c, present) in seen.iter().enumerate() {
                if !present && l.contains(&c) {
                    warnings.push(format!("class {c} absent from training fold {f}"));
                }
            }
        }
    }
    Ok(FoldSet {
        folds,
        assignment,
        warnings,
    })
}
