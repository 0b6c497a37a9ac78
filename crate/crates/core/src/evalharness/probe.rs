use serde::{Deserialize, Serialize};

use super::{fit_logreg, fit_mlp_probe, EvalError, LogisticRegression, MlpProbe};
use crate::linalg::Mat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Logreg,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSpec {
    pub kind: ProbeKind,
    /// ReLU hidden widths; MLP only.
    pub hidden: Vec<usize>,
    /// L2 penalty on weights (biases unpenalized).
    pub l2: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Adam step size; MLP only.
    pub learning_rate: f64,
    /// Fraction of training rows held out for early stopping; MLP only.
    pub validation_frac: f64,
    /// Iterations without validation improvement before stopping; MLP only.
    pub patience: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self::logreg()
    }
}

impl ProbeSpec {
    pub fn logreg() -> Self {
        Self {
            kind: ProbeKind::Logreg,
            hidden: Vec::new(),
            l2: 1.0,
            max_iters: 2000,
            seed: 0,
            learning_rate: 0.01,
            validation_frac: 0.1,
            patience: 30,
        }
    }

    pub fn mlp(hidden: Vec<usize>) -> Self {
        Self {
            kind: ProbeKind::Mlp,
            hidden,
            l2: 1e-4,
            max_iters: 500,
            ..Self::logreg()
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            ProbeKind::Logreg => "LR".to_string(),
            ProbeKind::Mlp => format!(
                "MLP[{}]",
                self.hidden
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join("-")
            ),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidProbe(m.to_string()));
        match self.kind {
            ProbeKind::Logreg if !self.hidden.is_empty() => {
                return bad("logistic regression takes no hidden layers")
            }
            ProbeKind::Mlp if self.hidden.is_empty() => {
                return bad("MLP needs at least one hidden layer")
            }
            _ => {}
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(self.l2 >= 0.0) || self.max_iters == 0 {
            return bad("l2 must be non-negative and max_iters positive");
        }
        if !(self.learning_rate > 0.0) || !(0.0..0.5).contains(&self.validation_frac) {
            return bad("learning_rate must be positive and validation_frac in [0, 0.5)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedProbe {
    Logreg(LogisticRegression),
    Mlp(MlpProbe),
}

impl FittedProbe {
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        match self {
            FittedProbe::Logreg(m) => m.predict_proba(row),
            FittedProbe::Mlp(m) => m.predict_proba(row),
        }
    }

    /// Highest-probability class, ties to the lower id.
    pub fn predict(&self, row: &[f64]) -> usize {
        let p = self.predict_proba(row);
        (0..p.len()).fold(0, |best, j| if p[j] > p[best] { j } else { best })
    }
}

pub fn fit_probe(
    x: &Mat<f64>,
    y: &[usize],
    classes: usize,
    spec: &ProbeSpec,
) -> Result<FittedProbe, EvalError> {
    spec.validate()?;
    match spec.kind {
        ProbeKind::Logreg => fit_logreg(x, y, classes, spec).map(FittedProbe::Logreg),
        ProbeKind::Mlp => fit_mlp_probe(x, y, classes, spec).map(FittedProbe::Mlp),
    }
}
