//! Benchmark drivers: cross-validated probes over author embeddings.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    accuracy, fit_probe, make_folds, weighted_f1, ConfusionMatrix, EvalError, EvalReport, FoldPlan,
    FoldSet, ProbeSpec,
};
use crate::corpus::{all_mbti_types, mbti_axis_labels, MbtiAxis};
use crate::linalg::Mat;
use crate::seeding::derive_rng;

/// Rows of `embeddings` for `authors`, in order.
fn design_matrix(
    authors: &[&String],
    embeddings: &BTreeMap<String, Vec<f64>>,
) -> Result<Mat<f64>, EvalError> {
    let missing: Vec<String> = authors
        .iter()
        .filter(|a| !embeddings.contains_key(a.as_str()))
        .map(|a| a.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingEmbeddings(missing));
    }
    let Some(first) = authors.first() else {
        return Err(EvalError::EmptyInput("labeled authors"));
    };
    let dim = embeddings[first.as_str()].len();
    let mut data = Vec::with_capacity(authors.len() * dim);
    for a in authors {
        let v = &embeddings[a.as_str()];
        if v.len() != dim {
            return Err(EvalError::DimMismatch {
                author: a.to_string(),
                expected: dim,
                got: v.len(),
            });
        }
        data.extend_from_slice(v);
    }
    Ok(Mat::from_vec(authors.len(), dim, data))
}

struct FoldOutcome {
    f1: f64,
    accuracy: f64,
    /// `(author index, predicted class)` for each test author.
    predictions: Vec<(usize, usize)>,
}

/// Fits one probe per fold in parallel; results keep fold order.
fn cross_validate(
    x: &Mat<f64>,
    y: &[usize],
    classes: usize,
    folds: &FoldSet,
    probe: &ProbeSpec,
) -> Result<Vec<FoldOutcome>, EvalError> {
    folds
        .folds
        .par_iter()
        .map(|fold| {
            let xt = Mat::from_fn(fold.train.len(), x.cols(), |i, j| x.get(fold.train[i], j));
            let yt: Vec<usize> = fold.train.iter().map(|&i| y[i]).collect();
            let model = fit_probe(&xt, &yt, classes, probe)?;
            let predictions: Vec<(usize, usize)> = fold
                .test
                .iter()
                .map(|&i| (i, model.predict(x.row(i))))
                .collect();
            let truth: Vec<usize> = fold.test.iter().map(|&i| y[i]).collect();
            let pred: Vec<usize> = predictions.iter().map(|p| p.1).collect();
            Ok(FoldOutcome {
                f1: weighted_f1(&truth, &pred)?,
                accuracy: accuracy(&truth, &pred)?,
                predictions,
            })
        })
        .collect()
}

fn assemble(
    embedding: &str,
    task: &str,
    probe: &ProbeSpec,
    plan: &FoldPlan,
    classes: Vec<String>,
    y: &[usize],
    outcomes: &[FoldOutcome],
    warnings: Vec<String>,
) -> EvalReport {
    let mut confusion = ConfusionMatrix::new(classes.len());
    for o in outcomes {
        o.predictions
            .iter()
            .for_each(|&(i, p)| confusion.add(y[i], p));
    }
    EvalReport::new(
        embedding,
        task,
        probe,
        plan,
        classes,
        y.len(),
        outcomes.iter().map(|o| o.f1).collect(),
        outcomes.iter().map(|o| o.accuracy).collect(),
        confusion,
        warnings,
    )
}

/// Cross-validated probe on `labels` (author → class name). Classes are
/// ordered by name; every labeled author needs an embedding.
pub fn run_benchmark(
    embedding: &str,
    task: &str,
    embeddings: &BTreeMap<String, Vec<f64>>,
    labels: &BTreeMap<String, String>,
    plan: &FoldPlan,
    probe: &ProbeSpec,
) -> Result<EvalReport, EvalError> {
    probe.validate()?;
    let authors: Vec<&String> = labels.keys().collect();
    let x = design_matrix(&authors, embeddings)?;
    let classes: Vec<String> = labels
        .values()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    let y: Vec<usize> = labels
        .values()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();
    let folds = make_folds(authors.len(), Some(&y), plan)?;
    folds.warnings.iter().for_each(|w| warn!("{task}: {w}"));
    let outcomes = cross_validate(&x, &y, classes.len(), &folds, probe)?;
    Ok(assemble(
        embedding,
        task,
        probe,
        plan,
        classes,
        &y,
        &outcomes,
        folds.warnings.clone(),
    ))
}

/// The same authors with labels permuted among them.
pub fn shuffled_labels(labels: &BTreeMap<String, String>, seed: u64) -> BTreeMap<String, String> {
    let mut values: Vec<String> = labels.values().cloned().collect();
    values.shuffle(&mut derive_rng(seed, "label-shuffle"));
    labels.keys().cloned().zip(values).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MbtiReport {
    /// One binary report per axis in `MbtiAxis::ALL` order.
    pub axes: Vec<EvalReport>,
    pub types: Vec<String>,
    /// Combined per-axis predictions against the true type.
    pub confusion: ConfusionMatrix,
    /// Rows divided by the frequency of each true type.
    pub confusion_normalized: Vec<Vec<f64>>,
}

/// Binary probe per MBTI axis over shared folds, plus the 16-type confusion
/// matrix of the combined axis predictions.
pub fn mbti_axis_benchmark(
    embedding: &str,
    embeddings: &BTreeMap<String, Vec<f64>>,
    mbti: &BTreeMap<String, String>,
    plan: &FoldPlan,
    probe: &ProbeSpec,
) -> Result<MbtiReport, EvalError> {
    probe.validate()?;
    let types = all_mbti_types();
    let authors: Vec<&String> = mbti.keys().collect();
    let mut axis_labels: Vec<Vec<usize>> = vec![Vec::with_capacity(authors.len()); 4];
    let mut type_ids = Vec::with_capacity(authors.len());
    for code in mbti.values() {
        let parsed = mbti_axis_labels(code).map_err(|_| EvalError::InvalidLabel(code.clone()))?;
        for (a, axis) in MbtiAxis::ALL.iter().enumerate() {
            axis_labels[a].push(usize::from(parsed[axis] == axis.letters()[1]));
        }
        let upper = code.trim().to_ascii_uppercase();
        type_ids.push(
            types
                .iter()
                .position(|t| *t == upper)
                .expect("validated code"),
        );
    }
    let x = design_matrix(&authors, embeddings)?;
    let folds = make_folds(authors.len(), Some(&type_ids), plan)?;

    let mut axes = Vec::with_capacity(4);
    let mut per_axis_predictions = Vec::with_capacity(4);
    for (a, axis) in MbtiAxis::ALL.iter().enumerate() {
        let y = &axis_labels[a];
        let classes: Vec<String> = axis.letters().iter().map(char::to_string).collect();
        if y.iter().all(|&l| l == y[0]) {
            return Err(EvalError::SingleClass);
        }
        let outcomes = cross_validate(&x, y, 2, &folds, probe)?;
        let task = format!("mbti:{axis}");
        axes.push(assemble(
            embedding,
            &task,
            probe,
            plan,
            classes,
            y,
            &outcomes,
            folds.warnings.clone(),
        ));
        per_axis_predictions.push(outcomes);
    }

    let mut confusion = ConfusionMatrix::new(types.len());
    for f in 0..folds.folds.len() {
        let n_test = per_axis_predictions[0][f].predictions.len();
        for t in 0..n_test {
            let author = per_axis_predictions[0][f].predictions[t].0;
            let mut letters = BTreeMap::new();
            for (a, axis) in MbtiAxis::ALL.iter().enumerate() {
                let (who, p) = per_axis_predictions[a][f].predictions[t];
                debug_assert_eq!(who, author);
                letters.insert(*axis, axis.letters()[p]);
            }
            let code =
                crate::corpus::mbti_from_axes(&letters).expect("letters come from the axis table");
            confusion.add(
                type_ids[author],
                types.iter().position(|t| *t == code).unwrap(),
            );
        }
    }
    Ok(MbtiReport {
        axes,
        types,
        confusion_normalized: confusion.normalized(),
        confusion,
    })
}
