//! The differentiable part of the model: Bi-GRU encoder, k-sparse code and
//! an optional MLP classification head.

use super::ModelConfig;
use crate::linalg::{Mat, Scalar};
use crate::nnkernel::{
    bigru_backward, bigru_encode, prefixed, prefixed_mut, softmax_xent, Activation, DenseLayer,
    GruCell, KSparseLayer, KSparseOutput, NnError, ParamView, ParamViewMut, Params, Pooling,
    SparsityMode,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub fwd: GruCell<T>,
    pub bwd: GruCell<T>,
    pub sparse: KSparseLayer<T>,
    /// ReLU hidden layers followed by one linear output layer.
    pub head: Option<Vec<DenseLayer<T>>>,
    pub pooling: Pooling,
}

/// Everything the backward pass needs from one forward pass.
pub struct Forward<T> {
    pub encoding: Vec<T>,
    pub code: KSparseOutput<T>,
    /// Inputs to each head layer followed by the logits.
    pub activations: Vec<Vec<T>>,
    trace: crate::nnkernel::BiGruTrace<T>,
}

impl<T> Forward<T> {
    pub fn logits(&self) -> &[T] {
        self.activations
            .last()
            .expect("forward with a head stores logits")
    }
}

impl<T: Scalar> Network<T> {
    pub fn input_dim(&self) -> usize {
        self.fwd.input_size()
    }

    pub fn classes(&self) -> Option<usize> {
        self.head
            .as_ref()
            .map(|h| h.last().expect("head has an output layer").outputs())
    }

    /// Sparse code for a sequence, without touching the head.
    pub fn encode(
        &self,
        sequence: &[&[T]],
        mode: SparsityMode,
    ) -> Result<KSparseOutput<T>, NnError> {
        let (enc, _) = bigru_encode(&self.fwd, &self.bwd, sequence, self.pooling)?;
        self.sparse.forward(&enc, mode)
    }

    /// Full forward pass. `support` pins the k-sparse gate (used for
    /// finite-difference checks); `None` selects top-k as usual.
    pub fn forward(
        &self,
        sequence: &[&[T]],
        mode: SparsityMode,
        support: Option<&[usize]>,
    ) -> Result<Forward<T>, NnError> {
        let head = self.head.as_ref().ok_or(NnError::LayoutMismatch)?;
        let (encoding, trace) = bigru_encode(&self.fwd, &self.bwd, sequence, self.pooling)?;
        let code = match support {
            Some(s) => self.sparse.forward_with_support(&encoding, s)?,
            None => self.sparse.forward(&encoding, mode)?,
        };
        let mut activations = Vec::with_capacity(head.len() + 1);
        activations.push(code.output.clone());
        for layer in head {
            let next = layer.forward(activations.last().unwrap())?;
            activations.push(next);
        }
        Ok(Forward {
            encoding,
            code,
            activations,
            trace,
        })
    }

    /// Cross-entropy against `target`; gradients are accumulated into `grads`.
    pub fn loss_and_grad(
        &self,
        sequence: &[&[T]],
        target: usize,
        mode: SparsityMode,
        grads: &mut Self,
    ) -> Result<(T, Forward<T>), NnError> {
        let fw = self.forward(sequence, mode, None)?;
        let loss = self.backward(sequence, &fw, target, grads);
        Ok((loss, fw))
    }

    /// Backward pass for a stored forward pass; returns the loss.
    pub fn backward(
        &self,
        sequence: &[&[T]],
        fw: &Forward<T>,
        target: usize,
        grads: &mut Self,
    ) -> T {
        let head = self.head.as_ref().expect("backward requires a head");
        let gh = grads.head.as_mut().expect("gradient buffer has a head");
        let (loss, mut delta) = softmax_xent(fw.logits(), target);
        for (i, layer) in head.iter().enumerate().rev() {
            delta = layer.backward(
                &fw.activations[i],
                &fw.activations[i + 1],
                &delta,
                &mut gh[i],
            );
        }
        let d_enc = self
            .sparse
            .backward(&fw.encoding, &fw.code, &delta, &mut grads.sparse);
        bigru_backward(
            &self.fwd,
            &self.bwd,
            sequence,
            &fw.trace,
            &d_enc,
            &mut grads.fwd,
            &mut grads.bwd,
        );
        loss
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            fwd: self.fwd.cast(),
            bwd: self.bwd.cast(),
            sparse: KSparseLayer {
                projection: self.sparse.projection.cast(),
                k_train: self.sparse.k_train,
                k_infer: self.sparse.k_infer,
            },
            head: self
                .head
                .as_ref()
                .map(|h| h.iter().map(DenseLayer::cast).collect()),
            pooling: self.pooling,
        }
    }

    /// Layers with random parameters drawn from `rng_for(component)`.
    pub fn build<R: rand::Rng>(
        config: &ModelConfig,
        classes: Option<&[String]>,
        mut rng_for: impl FnMut(&str) -> R,
    ) -> Self {
        let enc = 2 * config.hidden;
        let head = classes.map(|ids| {
            let mut layers = Vec::with_capacity(config.head_hidden.len() + 1);
            let mut width = config.code_dim;
            for (i, &h) in config.head_hidden.iter().enumerate() {
                layers.push(DenseLayer::new(
                    width,
                    h,
                    Activation::Relu,
                    &mut rng_for(&format!("head.{i}")),
                ));
                width = h;
            }
            // Output rows are drawn per class so relabeling permutes rows
            // instead of changing them.
            let mut out = DenseLayer {
                weights: Mat::zeros(ids.len(), width),
                bias: vec![T::zero(); ids.len()],
                activation: Activation::Linear,
            };
            for (row, id) in ids.iter().enumerate() {
                let single = DenseLayer::<T>::new(
                    width,
                    1,
                    Activation::Linear,
                    &mut rng_for(&format!("class:{id}")),
                );
                out.weights
                    .row_mut(row)
                    .copy_from_slice(single.weights.row(0));
            }
            // Glorot scaling uses the full fan-out.
            let limit_ratio = ((width + 1) as f64 / (width + ids.len()) as f64).sqrt();
            out.weights
                .as_mut_slice()
                .iter_mut()
                .for_each(|w| *w *= T::of(limit_ratio));
            layers.push(out);
            layers
        });
        Self {
            fwd: GruCell::new(config.input_dim, config.hidden, &mut rng_for("encoder.fwd")),
            bwd: GruCell::new(config.input_dim, config.hidden, &mut rng_for("encoder.bwd")),
            sparse: KSparseLayer::new(
                enc,
                config.code_dim,
                config.k_train,
                config.k_infer,
                &mut rng_for("sparse"),
            ),
            head,
            pooling: config.pooling,
        }
    }
}

impl<T: Scalar> Params<T> for Network<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut v = prefixed("encoder.fwd", self.fwd.params());
        v.extend(prefixed("encoder.bwd", self.bwd.params()));
        v.extend(prefixed("sparse", self.sparse.params()));
        if let Some(head) = &self.head {
            for (i, l) in head.iter().enumerate() {
                v.extend(prefixed(&format!("head.{i}"), l.params()));
            }
        }
        v
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        let mut v = prefixed_mut("encoder.fwd", self.fwd.params_mut());
        v.extend(prefixed_mut("encoder.bwd", self.bwd.params_mut()));
        v.extend(prefixed_mut("sparse", self.sparse.params_mut()));
        if let Some(head) = &mut self.head {
            for (i, l) in head.iter_mut().enumerate() {
                v.extend(prefixed_mut(&format!("head.{i}"), l.params_mut()));
            }
        }
        v
    }

    fn zeros_like(&self) -> Self {
        Self {
            fwd: self.fwd.zeros_like(),
            bwd: self.bwd.zeros_like(),
            sparse: self.sparse.zeros_like(),
            head: self
                .head
                .as_ref()
                .map(|h| h.iter().map(Params::zeros_like).collect()),
            pooling: self.pooling,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkernel::grad_check;
    use crate::seeding::derive_rng;

    fn toy(pooling: Pooling) -> Network<f64> {
        let config = ModelConfig {
            input_dim: 5,
            hidden: 4,
            code_dim: 6,
            k_train: 3,
            k_infer: 4,
            head_hidden: vec![5],
            pooling,
        };
        let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        Network::<f32>::build(&config, Some(&ids), |c| derive_rng(3, c)).cast()
    }

    fn posts() -> Vec<Vec<f64>> {
        (0..4)
            .map(|t| (0..5).map(|i| ((t * 5 + i) as f64 * 0.71).sin()).collect())
            .collect()
    }

    #[test]
    fn full_loss_gradient_three_authors_four_posts() {
        for pooling in [Pooling::Final, Pooling::Mean] {
            let mut net = toy(pooling);
            // Nudge biases so no ReLU sits exactly at its kink.
            for l in net.head.as_mut().unwrap() {
                l.bias.iter_mut().for_each(|b| *b = 0.05);
            }
            let posts = posts();
            let seq: Vec<&[f64]> = posts.iter().map(Vec::as_slice).collect();
            for target in 0..3 {
                let mut grads = net.zeros_like();
                let (_, fw) = net
                    .loss_and_grad(&seq, target, SparsityMode::Train, &mut grads)
                    .unwrap();
                let support = fw.code.support.clone();
                let report = grad_check(
                    &mut net,
                    &grads,
                    |n| {
                        let f = n
                            .forward(&seq, SparsityMode::Train, Some(&support))
                            .unwrap();
                        softmax_xent(f.logits(), target).0
                    },
                    1e-6,
                    1e-3,
                );
                assert!(
                    report.passed(),
                    "{pooling:?} {:#?}",
                    report.failing_blocks().collect::<Vec<_>>()
                );
            }
        }
    }

    #[test]
    fn code_respects_sparsity() {
        let net = toy(Pooling::Final);
        let posts = posts();
        let seq: Vec<&[f64]> = posts.iter().map(Vec::as_slice).collect();
        let train = net.encode(&seq, SparsityMode::Train).unwrap();
        let infer = net.encode(&seq, SparsityMode::Infer).unwrap();
        assert!(train.output.iter().filter(|v| **v != 0.0).count() <= 3);
        assert!(infer.output.iter().filter(|v| **v != 0.0).count() <= 4);
        assert_eq!(train.projected, infer.projected);
    }

    #[test]
    fn relabeled_build_permutes_output_rows() {
        let config = ModelConfig {
            input_dim: 3,
            hidden: 2,
            code_dim: 4,
            k_train: 2,
            k_infer: 2,
            head_hidden: vec![3],
            pooling: Pooling::Final,
        };
        let a: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
        let b: Vec<String> = ["z", "x", "y"].map(String::from).to_vec();
        let na = Network::<f32>::build(&config, Some(&a), |c| derive_rng(1, c));
        let nb = Network::<f32>::build(&config, Some(&b), |c| derive_rng(1, c));
        let (ha, hb) = (na.head.unwrap(), nb.head.unwrap());
        assert_eq!(ha[0], hb[0]);
        assert_eq!(ha[1].weights.row(2), hb[1].weights.row(0));
        assert_eq!(ha[1].weights.row(0), hb[1].weights.row(1));
    }
}
