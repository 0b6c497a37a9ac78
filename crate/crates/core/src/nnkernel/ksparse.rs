//! K-sparse linear layer: a linear projection followed by a hard gate that
//! keeps only the `k` entries of largest magnitude.

use std::cmp::Ordering;

use rand::Rng;

use super::{Activation, DenseLayer, NnError, ParamView, ParamViewMut, Params};
use crate::linalg::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SparsityMode {
    Train,
    Infer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KSparseLayer<T> {
    pub projection: DenseLayer<T>,
    pub k_train: usize,
    pub k_infer: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KSparseOutput<T> {
    pub output: Vec<T>,
    pub projected: Vec<T>,
    /// Surviving indices, ascending.
    pub support: Vec<usize>,
}

/// Indices of the `k` largest-magnitude entries, ascending. Ties go to the
/// lower index.
pub fn top_k_support<T: Scalar>(values: &[T], k: usize) -> Vec<usize> {
    if k >= values.len() {
        return (0..values.len()).collect();
    }
    if k == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = |&a: &usize, &b: &usize| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    };
    idx.select_nth_unstable_by(k - 1, cmp);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

impl<T: Scalar> KSparseLayer<T> {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        k_train: usize,
        k_infer: usize,
        rng: &mut R,
    ) -> Self {
        assert!(
            0 < k_train && k_train <= k_infer && k_infer <= outputs,
            "k-sparse requires 0 < k_train <= k_infer <= width"
        );
        Self {
            projection: DenseLayer::new(inputs, outputs, Activation::Linear, rng),
            k_train,
            k_infer,
        }
    }

    pub fn k(&self, mode: SparsityMode) -> usize {
        match mode {
            SparsityMode::Train => self.k_train,
            SparsityMode::Infer => self.k_infer,
        }
    }

    pub fn forward(&self, x: &[T], mode: SparsityMode) -> Result<KSparseOutput<T>, NnError> {
        let projected = self.projection.forward(x)?;
        let support = top_k_support(&projected, self.k(mode));
        Ok(Self::gate(projected, support))
    }

    /// Forward pass with a caller-chosen support, used to hold the gate fixed
    /// while perturbing parameters.
    pub fn forward_with_support(
        &self,
        x: &[T],
        support: &[usize],
    ) -> Result<KSparseOutput<T>, NnError> {
        let projected = self.projection.forward(x)?;
        Ok(Self::gate(projected, support.to_vec()))
    }

    fn gate(projected: Vec<T>, support: Vec<usize>) -> KSparseOutput<T> {
        let mut output = vec![T::zero(); projected.len()];
        for &i in &support {
            output[i] = projected[i];
        }
        KSparseOutput {
            output,
            projected,
            support,
        }
    }

    /// Gradients pass through the surviving support only.
    pub fn backward(&self, x: &[T], out: &KSparseOutput<T>, dy: &[T], grads: &mut Self) -> Vec<T> {
        let mut gated = vec![T::zero(); dy.len()];
        for &i in &out.support {
            gated[i] = dy[i];
        }
        self.projection
            .backward(x, &out.projected, &gated, &mut grads.projection)
    }
}

impl<T: Scalar> Params<T> for KSparseLayer<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        self.projection.params()
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        self.projection.params_mut()
    }

    fn zeros_like(&self) -> Self {
        Self {
            projection: self.projection.zeros_like(),
            k_train: self.k_train,
            k_infer: self.k_infer,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::nnkernel::grad_check;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_traced_top_two() {
        assert_eq!(top_k_support(&[3.0, -5.0, 1.0, 2.0], 2), vec![0, 1]);
        let layer = KSparseLayer {
            projection: DenseLayer {
                weights: Mat::identity(4),
                bias: vec![0.0; 4],
                activation: Activation::Linear,
            },
            k_train: 2,
            k_infer: 2,
        };
        let out = layer
            .forward(&[3.0, -5.0, 1.0, 2.0], SparsityMode::Train)
            .unwrap();
        assert_eq!(out.output, vec![3.0, -5.0, 0.0, 0.0]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(top_k_support(&[1.0, -1.0, 1.0, 0.5], 2), vec![0, 1]);
        assert_eq!(top_k_support(&[0.0_f64; 5], 3), vec![0, 1, 2]);
    }

    #[test]
    fn zero_projection_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut layer = KSparseLayer::<f64>::new(3, 8, 2, 4, &mut rng);
        layer.projection.fill_zero();
        let out = layer
            .forward(&[1.0, 2.0, 3.0], SparsityMode::Infer)
            .unwrap();
        assert!(out.output.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_with_frozen_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut layer = KSparseLayer::<f64>::new(5, 10, 3, 6, &mut rng);
        let x = [0.5, -0.1, 0.3, 0.9, -0.6];
        let c: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37 + 0.2).sin()).collect();
        let out = layer.forward(&x, SparsityMode::Train).unwrap();
        let mut grads = layer.zeros_like();
        layer.backward(&x, &out, &c, &mut grads);
        // Rows outside the support receive no gradient.
        for row in 0..10 {
            let touched = grads.projection.weights.row(row).iter().any(|&v| v != 0.0);
            assert_eq!(touched, out.support.contains(&row));
        }
        let support = out.support.clone();
        let report = grad_check(
            &mut layer,
            &grads,
            |l| {
                let o = l.forward_with_support(&x, &support).unwrap();
                o.output.iter().zip(&c).map(|(a, b)| a * b).sum()
            },
            1e-6,
            1e-6,
        );
        assert!(report.passed(), "{report:#?}");
    }

    proptest! {
        #[test]
        fn support_is_bounded_and_values_exact(values in proptest::collection::vec(-10.0f32..10.0, 1..64), k in 1usize..70) {
            let support = top_k_support(&values, k);
            prop_assert!(support.len() <= k);
            prop_assert!(support.windows(2).all(|w| w[0] < w[1]));
            let min_kept = support.iter().map(|&i| values[i].abs()).fold(f32::INFINITY, f32::min);
            for (i, v) in values.iter().enumerate() {
                if !support.contains(&i) {
                    prop_assert!(v.abs() <= min_kept);
                }
            }
        }
    }
}
