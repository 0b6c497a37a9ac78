//! Downstream evaluation of user embeddings: cross-validation plans, linear
//! and MLP probes, metrics and benchmark drivers.

mod benchmark;
mod folds;
mod logreg;
mod metrics;
mod mlp;
mod probe;
mod report;

pub use benchmark::{mbti_axis_benchmark, run_benchmark, shuffled_labels, MbtiReport};
pub use folds::{make_folds, Fold, FoldPlan, FoldScheme, FoldSet};
pub use logreg::{fit_logreg, LogisticRegression};
pub use metrics::{accuracy, per_class_f1, topk_accuracy, weighted_f1, ConfusionMatrix};
pub use mlp::{fit_mlp_probe, MlpProbe};
pub use probe::{fit_probe, FittedProbe, ProbeKind, ProbeSpec};
pub use report::{comparison_table, population_std, EvalReport, REPORT_SCHEMA_VERSION};

use thiserror::Error;

use crate::linalg::Mat;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("invalid fold plan: {0}")]
    InvalidPlan(String),
    #[error("invalid probe: {0}")]
    InvalidProbe(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("k = {k} exceeds class count {classes}")]
    TopKTooLarge { k: usize, classes: usize },
    #[error("authors without embeddings: {}", .0.join(", "))]
    MissingEmbeddings(Vec<String>),
    #[error("embedding dims differ: {expected} vs {got} for {author:?}")]
    DimMismatch {
        author: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("probe diverged (non-finite loss)")]
    NonFinite,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-column mean and scale fitted on training rows. Constant columns keep
/// a scale of 1.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Mat<f64>) -> Self {
        let (n, d) = (x.rows() as f64, x.cols());
        let mut mean = vec![0.0; d];
        for i in 0..x.rows() {
            crate::linalg::axpy(1.0, x.row(i), &mut mean);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..x.rows() {
            for (j, v) in x.row(i).iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: &Mat<f64>) -> Mat<f64> {
        Mat::from_fn(x.rows(), x.cols(), |i, j| {
            (x.get(i, j) - self.mean[j]) / self.scale[j]
        })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.scale[j])
            .collect()
    }
}

/// Label ids must lie in `0..classes` and both lengths must agree.
pub(crate) fn check_xy(x: &Mat<f64>, y: &[usize], classes: usize) -> Result<(), EvalError> {
    if x.rows() != y.len() {
        return Err(EvalError::LengthMismatch {
            left: x.rows(),
            right: y.len(),
        });
    }
    if y.is_empty() {
        return Err(EvalError::EmptyInput("training set"));
    }
    if let Some(&label) = y.iter().find(|&&l| l >= classes) {
        return Err(EvalError::LabelOutOfRange { label, classes });
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(EvalError::SingleClass);
    }
    Ok(())
}
