use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init, NnError, ParamView, ParamViewMut, Params};
use crate::linalg::{Mat, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
}

/// Fully connected layer `y = act(W x + b)` with `W` stored out × in.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Mat<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            weights: init::glorot_uniform(outputs, inputs, rng),
            bias: vec![T::zero(); outputs],
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, NnError> {
        if x.len() != self.inputs() {
            return Err(NnError::ShapeMismatch {
                what: "dense input",
                expected: self.inputs(),
                got: x.len(),
            });
        }
        let mut y = self.bias.clone();
        self.weights.gemv_acc(x, &mut y);
        if self.activation == Activation::Relu {
            y.iter_mut().for_each(|v| *v = v.max(T::zero()));
        }
        Ok(y)
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    /// `y` is the output produced by [`forward`](Self::forward) for `x`.
    pub fn backward(&self, x: &[T], y: &[T], dy: &[T], grads: &mut Self) -> Vec<T> {
        let delta: Vec<T> = match self.activation {
            Activation::Linear => dy.to_vec(),
            Activation::Relu => dy
                .iter()
                .zip(y)
                .map(|(&g, &o)| if o > T::zero() { g } else { T::zero() })
                .collect(),
        };
        grads.weights.rank1_acc(&delta, x);
        for (b, &d) in grads.bias.iter_mut().zip(&delta) {
            *b += d;
        }
        let mut dx = vec![T::zero(); self.inputs()];
        self.weights.gemv_t_acc(&delta, &mut dx);
        dx
    }

    pub fn cast<U: Scalar>(&self) -> DenseLayer<U> {
        DenseLayer {
            weights: Mat::from_vec(
                self.weights.rows(),
                self.weights.cols(),
                self.weights
                    .as_slice()
                    .iter()
                    .map(|v| U::of(v.to_f64().unwrap()))
                    .collect(),
            ),
            bias: self
                .bias
                .iter()
                .map(|v| U::of(v.to_f64().unwrap()))
                .collect(),
            activation: self.activation,
        }
    }
}

impl<T: Scalar> Params<T> for DenseLayer<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        vec![
            ParamView {
                name: "weight".into(),
                shape: vec![self.weights.rows(), self.weights.cols()],
                data: self.weights.as_slice(),
            },
            ParamView {
                name: "bias".into(),
                shape: vec![self.bias.len()],
                data: &self.bias,
            },
        ]
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        let shape = vec![self.weights.rows(), self.weights.cols()];
        let bias_len = self.bias.len();
        vec![
            ParamViewMut {
                name: "weight".into(),
                shape,
                data: self.weights.as_mut_slice(),
            },
            ParamViewMut {
                name: "bias".into(),
                shape: vec![bias_len],
                data: &mut self.bias,
            },
        ]
    }

    fn zeros_like(&self) -> Self {
        Self {
            weights: Mat::zeros(self.weights.rows(), self.weights.cols()),
            bias: vec![T::zero(); self.bias.len()],
            activation: self.activation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkernel::{grad_check, softmax_xent, ParamVec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_clamps_negative_outputs() {
        let layer = DenseLayer {
            weights: Mat::from_vec(2, 1, vec![1.0_f64, -1.0]),
            bias: vec![0.0, 0.0],
            activation: Activation::Relu,
        };
        assert_eq!(layer.forward(&[2.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn rejects_wrong_input_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = DenseLayer::<f64>::new(3, 2, Activation::Linear, &mut rng);
        assert!(matches!(
            layer.forward(&[1.0]),
            Err(NnError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = DenseLayer::<f64>::new(5, 3, Activation::Linear, &mut rng);
        let mut x = ParamVec {
            name: "x".into(),
            data: vec![0.3, -0.2, 0.9, 0.1, -0.7],
        };
        let y = layer.forward(&x.data).unwrap();
        let (_, dy) = softmax_xent(&y, 1);
        let mut sink = layer.zeros_like();
        let dx = layer.backward(&x.data, &y, &dy, &mut sink);
        let analytic = ParamVec {
            name: "x".into(),
            data: dx,
        };
        let report = grad_check(
            &mut x,
            &analytic,
            |xv: &ParamVec<f64>| softmax_xent(&layer.forward(&xv.data).unwrap(), 1).0,
            1e-5,
            1e-6,
        );
        assert!(report.passed(), "{report:?}");
    }
}
