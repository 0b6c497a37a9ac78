//! ReLU MLP probe trained with full-batch Adam and early stopping on a
//! stratified validation slice.

use rand::seq::SliceRandom;

use super::{check_xy, EvalError, ProbeSpec, Standardizer};
use crate::linalg::Mat;
use crate::nnkernel::{
    prefixed, prefixed_mut, softmax, softmax_xent, Activation, AdamConfig, AdamState, DenseLayer,
    ParamView, ParamViewMut, Params,
};
use crate::seeding::derive_rng;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpProbe {
    pub standardizer: Standardizer,
    pub layers: Vec<DenseLayer<f64>>,
    /// Iteration whose parameters were kept.
    pub best_iteration: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Stack(Vec<DenseLayer<f64>>);

impl Params<f64> for Stack {
    fn params(&self) -> Vec<ParamView<'_, f64>> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("layer.{i}"), l.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, f64>> {
        self.0
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| prefixed_mut(&format!("layer.{i}"), l.params_mut()))
            .collect()
    }

    fn zeros_like(&self) -> Self {
        Stack(self.0.iter().map(Params::zeros_like).collect())
    }
}

impl Stack {
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for l in &self.0 {
            let next = l
                .forward(acts.last().unwrap())
                .expect("widths fixed at construction");
            acts.push(next);
        }
        acts
    }

    /// Mean cross-entropy over `rows`; accumulates the mean gradient when
    /// `grads` is given.
    fn loss(
        &self,
        x: &Mat<f64>,
        y: &[usize],
        rows: &[usize],
        mut grads: Option<&mut Stack>,
    ) -> f64 {
        let scale = 1.0 / rows.len() as f64;
        let mut total = 0.0;
        for &i in rows {
            let acts = self.activations(x.row(i));
            let (loss, mut d) = softmax_xent(acts.last().unwrap(), y[i]);
            total += loss;
            if let Some(g) = grads.as_deref_mut() {
                d.iter_mut().for_each(|v| *v *= scale);
                for (li, layer) in self.0.iter().enumerate().rev() {
                    d = layer.backward(&acts[li], &acts[li + 1], &d, &mut g.0[li]);
                }
            }
        }
        total * scale
    }
}

/// Splits rows into (train, validation) with every class represented in
/// proportion. Validation is empty when it would hold no row.
fn stratified_split(y: &[usize], frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = derive_rng(seed, "mlp-validation");
    let classes = y.iter().max().map_or(0, |m| m + 1);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        rows.shuffle(&mut rng);
        let n_val = ((rows.len() as f64) * frac).floor() as usize;
        let n_val = n_val.min(rows.len().saturating_sub(1));
        val.extend_from_slice(&rows[..n_val]);
        train.extend_from_slice(&rows[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

pub fn fit_mlp_probe(
    x: &Mat<f64>,
    y: &[usize],
    classes: usize,
    spec: &ProbeSpec,
) -> Result<MlpProbe, EvalError> {
    check_xy(x, y, classes)?;
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let mut rng = derive_rng(spec.seed, "mlp-init");
    let mut layers = Vec::with_capacity(spec.hidden.len() + 1);
    let mut width = x.cols();
    for &h in &spec.hidden {
        layers.push(DenseLayer::new(width, h, Activation::Relu, &mut rng));
        width = h;
    }
    layers.push(DenseLayer::new(
        width,
        classes.max(2),
        Activation::Linear,
        &mut rng,
    ));
    let mut net = Stack(layers);

    let (train, val) = stratified_split(y, spec.validation_frac, spec.seed);
    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: spec.learning_rate,
            ..AdamConfig::default()
        },
        &net,
    );
    let mut best = (f64::INFINITY, 0, net.clone());
    for it in 0..spec.max_iters {
        let mut grads = net.zeros_like();
        let loss = net.loss(&xs, y, &train, Some(&mut grads));
        if !loss.is_finite() {
            return Err(EvalError::NonFinite);
        }
        for (g, p) in grads.0.iter_mut().zip(&net.0) {
            crate::linalg::axpy(spec.l2, p.weights.as_slice(), g.weights.as_mut_slice());
        }
        adam.step(&mut net, &grads)
            .map_err(|_| EvalError::NonFinite)?;
        let monitored = if val.is_empty() {
            loss
        } else {
            net.loss(&xs, y, &val, None)
        };
        if monitored < best.0 {
            best = (monitored, it, net.clone());
        } else if !val.is_empty() && it - best.1 >= spec.patience {
            break;
        }
    }
    Ok(MlpProbe {
        standardizer,
        layers: best.2 .0,
        best_iteration: best.1,
    })
}

impl MlpProbe {
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let xs = self.standardizer.transform_row(row);
        let stack = Stack(self.layers.clone());
        softmax(stack.activations(&xs).last().unwrap())
    }
}
