//! Minimal neural-network kernel with hand-derived gradients.
//!
//! Layers are generic over [`Scalar`] so the same code trains in `f32` and is
//! gradient-checked in `f64`. Every trainable container implements [`Params`],
//! which exposes named parameter blocks; gradient buffers are plain values of
//! the same type, built with [`Params::zeros_like`].

mod adam;
mod dense;
mod gradcheck;
mod gru;
pub mod init;
mod ksparse;
mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{Activation, DenseLayer};
pub use gradcheck::{grad_check, BlockError, GradCheckReport};
pub use gru::{
    bigru_backward, bigru_encode, gru_backward, gru_forward, BiGruTrace, GruCell, GruInputGrads,
    GruTrace, Pooling, Upstream,
};
pub use ksparse::{top_k_support, KSparseLayer, KSparseOutput, SparsityMode};
pub use loss::{softmax, softmax_xent};

use crate::linalg::Scalar;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NnError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },
    #[error("parameter layout mismatch between model and gradient/optimizer state")]
    LayoutMismatch,
}

/// Read-only view of one named parameter block.
pub struct ParamView<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

/// Mutable view of one named parameter block.
pub struct ParamViewMut<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [T],
}

/// A container of named parameter blocks in a fixed order.
pub trait Params<T: Scalar> {
    fn params(&self) -> Vec<ParamView<'_, T>>;
    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>>;

    /// Same layout, every value zero. Used as a gradient accumulator.
    fn zeros_like(&self) -> Self
    where
        Self: Sized;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.data.len()).sum()
    }

    fn fill_zero(&mut self) {
        for p in self.params_mut() {
            p.data.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// `self += other`, block by block in order.
    fn add_assign_params(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src = other.params();
        for (dst, src) in self.params_mut().into_iter().zip(src) {
            for (d, &s) in dst.data.iter_mut().zip(src.data) {
                *d += s;
            }
        }
    }

    fn scale_params(&mut self, factor: T) {
        for p in self.params_mut() {
            p.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// L2 norm over every block.
    fn global_norm(&self) -> T {
        let mut acc = T::zero();
        for p in self.params() {
            acc += crate::linalg::dot(p.data, p.data);
        }
        acc.sqrt()
    }
}

/// Rescales `grads` so that their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar, P: Params<T>>(grads: &mut P, max_norm: T) -> T {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale_params(max_norm / norm);
    }
    norm
}

pub(crate) fn prefixed<'a, T>(prefix: &str, views: Vec<ParamView<'a, T>>) -> Vec<ParamView<'a, T>> {
    views
        .into_iter()
        .map(|mut v| {
            v.name = format!("{prefix}.{}", v.name);
            v
        })
        .collect()
}

pub(crate) fn prefixed_mut<'a, T>(
    prefix: &str,
    views: Vec<ParamViewMut<'a, T>>,
) -> Vec<ParamViewMut<'a, T>> {
    views
        .into_iter()
        .map(|mut v| {
            v.name = format!("{prefix}.{}", v.name);
            v
        })
        .collect()
}

/// A single named vector exposed as a parameter block. Handy for checking
/// gradients with respect to layer inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVec<T> {
    pub name: String,
    pub data: Vec<T>,
}

impl<T: Scalar> Params<T> for ParamVec<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        vec![ParamView {
            name: self.name.clone(),
            shape: vec![self.data.len()],
            data: &self.data,
        }]
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        vec![ParamViewMut {
            name: self.name.clone(),
            shape: vec![self.data.len()],
            data: &mut self.data,
        }]
    }

    fn zeros_like(&self) -> Self {
        Self {
            name: self.name.clone(),
            data: vec![T::zero(); self.data.len()],
        }
    }
}
