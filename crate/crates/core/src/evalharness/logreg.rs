//! L2-regularized logistic regression, one-vs-rest for more than two classes.

use log::debug;

use super::{check_xy, EvalError, ProbeSpec, Standardizer};
use crate::linalg::{dot, Mat};

/// Gradient-norm threshold for convergence.
const GRAD_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegression {
    pub standardizer: Standardizer,
    /// One `(weights, bias)` per binary problem: a single one for two
    /// classes (positive = class 1), otherwise one per class.
    pub units: Vec<(Vec<f64>, f64)>,
    pub classes: usize,
    /// Iterations used per unit.
    pub iterations: Vec<usize>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `Σ softplus(-s·z) + l2/2·‖w‖²` with `s = ±1`, and its gradient.
fn objective(x: &Mat<f64>, s: &[f64], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let mut loss = 0.5 * l2 * dot(w, w);
    let mut gw: Vec<f64> = w.iter().map(|v| l2 * v).collect();
    let mut gb = 0.0;
    for (i, &si) in s.iter().enumerate() {
        let row = x.row(i);
        let z = dot(w, row) + b;
        loss += softplus(-si * z);
        let coef = -si * sigmoid(-si * z);
        crate::linalg::axpy(coef, row, &mut gw);
        gb += coef;
    }
    (loss, gw, gb)
}

/// Full-batch gradient descent with Armijo backtracking. The trial step
/// doubles after each accepted step.
fn fit_binary(
    x: &Mat<f64>,
    positive: &[bool],
    l2: f64,
    max_iters: usize,
) -> (Vec<f64>, f64, usize) {
    let s: Vec<f64> = positive
        .iter()
        .map(|&p| if p { 1.0 } else { -1.0 })
        .collect();
    let mut w = vec![0.0; x.cols()];
    let mut b = 0.0;
    let mut step = 1.0 / x.rows() as f64;
    let (mut f, mut gw, mut gb) = objective(x, &s, &w, b, l2);
    for it in 0..max_iters {
        let g2 = dot(&gw, &gw) + gb * gb;
        if g2.sqrt() < GRAD_TOL {
            return (w, b, it);
        }
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
            let b_new = b - step * gb;
            let (f_new, gw_new, gb_new) = objective(x, &s, &w_new, b_new, l2);
            if f_new <= f - 0.5 * step * g2 {
                (w, b, f, gw, gb) = (w_new, b_new, f_new, gw_new, gb_new);
                step *= 2.0;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return (w, b, it);
            }
        }
    }
    (w, b, max_iters)
}

pub fn fit_logreg(
    x: &Mat<f64>,
    y: &[usize],
    classes: usize,
    spec: &ProbeSpec,
) -> Result<LogisticRegression, EvalError> {
    check_xy(x, y, classes)?;
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let targets: Vec<usize> = if classes == 2 {
        vec![1]
    } else {
        (0..classes).collect()
    };
    let mut units = Vec::with_capacity(targets.len());
    let mut iterations = Vec::with_capacity(targets.len());
    for c in targets {
        let positive: Vec<bool> = y.iter().map(|&l| l == c).collect();
        let (w, b, it) = fit_binary(&xs, &positive, spec.l2, spec.max_iters);
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        debug!("logreg unit {c}: {it} iterations");
        units.push((w, b));
        iterations.push(it);
    }
    Ok(LogisticRegression {
        standardizer,
        units,
        classes,
        iterations,
    })
}

impl LogisticRegression {
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let xs = self.standardizer.transform_row(row);
        let scores: Vec<f64> = self
            .units
            .iter()
            .map(|(w, b)| sigmoid(dot(w, &xs) + b))
            .collect();
        if self.classes == 2 {
            return vec![1.0 - scores[0], scores[0]];
        }
        let total: f64 = scores.iter().sum();
        if total > 0.0 {
            scores.iter().map(|s| s / total).collect()
        } else {
            vec![1.0 / self.classes as f64; self.classes]
        }
    }
}
