//! Cross-validation report: per-fold scores, aggregates and confusion
//! matrices, serialized as versioned JSON, a text table or CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, FoldPlan, ProbeSpec};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Standard deviation with an `n` denominator.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    /// Name of the embedding being probed, e.g. `author2vec` or `lsi`.
    pub embedding: String,
    /// Attribute or task name, e.g. `depressed` or `mbti:EI`.
    pub task: String,
    pub probe: ProbeSpec,
    pub plan: FoldPlan,
    pub classes: Vec<String>,
    pub n_authors: usize,
    pub fold_f1: Vec<f64>,
    pub fold_accuracy: Vec<f64>,
    pub f1_min: f64,
    pub f1_max: f64,
    pub f1_avg: f64,
    /// Population standard deviation (`n` denominator) over folds.
    pub f1_std: f64,
    /// Summed over every fold's test predictions.
    pub confusion: ConfusionMatrix,
    pub confusion_normalized: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        embedding: &str,
        task: &str,
        probe: &ProbeSpec,
        plan: &FoldPlan,
        classes: Vec<String>,
        n_authors: usize,
        fold_f1: Vec<f64>,
        fold_accuracy: Vec<f64>,
        confusion: ConfusionMatrix,
        warnings: Vec<String>,
    ) -> Self {
        let f1_min = fold_f1.iter().copied().fold(f64::INFINITY, f64::min);
        let f1_max = fold_f1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let f1_avg = fold_f1.iter().sum::<f64>() / fold_f1.len() as f64;
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            embedding: embedding.to_string(),
            task: task.to_string(),
            probe: probe.clone(),
            plan: plan.clone(),
            classes,
            n_authors,
            f1_std: population_std(&fold_f1),
            fold_f1,
            fold_accuracy,
            f1_min,
            f1_max,
            f1_avg,
            confusion_normalized: confusion.normalized(),
            confusion,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn text_table(&self) -> String {
        let mut out = format!(
            "{} / {} / {} ({:?}, k={})\n",
            self.embedding,
            self.task,
            self.probe.label(),
            self.plan.scheme,
            self.plan.k
        );
        out.push_str("fold  weighted-F1  accuracy\n");
        for (i, (f, a)) in self.fold_f1.iter().zip(&self.fold_accuracy).enumerate() {
            let _ = writeln!(out, "{:>4}  {:>11.4}  {:>8.4}", i + 1, f, a);
        }
        let _ = writeln!(
            out,
            "min {:.4}  max {:.4}  avg {:.4}  std {:.4}",
            self.f1_min, self.f1_max, self.f1_avg, self.f1_std
        );
        out
    }

    pub fn confusion_csv(&self, normalized: bool) -> String {
        self.confusion.to_csv(&self.classes, normalized)
    }
}

/// One row per report: embedding, probe, min/max/avg/std of weighted F1.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.embedding.len())
        .max()
        .unwrap_or(0)
        .max(9);
    let mut out = format!(
        "{:<width$}  {:<10}  {:>6}  {:>6}  {:>6}  {:>6}\n",
        "embedding", "probe", "min", "max", "avg", "std"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:<10}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}",
            r.embedding,
            r.probe.label(),
            r.f1_min,
            r.f1_max,
            r.f1_avg,
            r.f1_std
        );
    }
    out
}
