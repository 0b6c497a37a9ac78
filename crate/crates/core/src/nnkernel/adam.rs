use serde::{Deserialize, Serialize};

use super::{NnError, Params};
use crate::linalg::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments, one buffer per parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<P: Params<T>>(config: AdamConfig, params: &P) -> Self {
        let zeros: Vec<Vec<T>> = params
            .params()
            .iter()
            .map(|p| vec![T::zero(); p.data.len()])
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// One update. Nothing is modified if any gradient is non-finite.
    pub fn step<P: Params<T>>(&mut self, params: &mut P, grads: &P) -> Result<(), NnError> {
        let grad_views = grads.params();
        if grad_views.len() != self.first.len() {
            return Err(NnError::LayoutMismatch);
        }
        for (g, m) in grad_views.iter().zip(&self.first) {
            if g.data.len() != m.len() {
                return Err(NnError::LayoutMismatch);
            }
            if g.data.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteGradient {
                    block: g.name.clone(),
                });
            }
        }
        self.step += 1;
        let c = self.config;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let one = T::one();
        let bias1 = T::of(1.0 - c.beta1.powi(self.step as i32));
        let bias2 = T::of(1.0 - c.beta2.powi(self.step as i32));
        let lr = T::of(c.learning_rate);
        let eps = T::of(c.epsilon);
        for (((p, g), m), v) in params
            .params_mut()
            .into_iter()
            .zip(grad_views)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn adam_step<T: Scalar, P: Params<T>>(
    state: &mut AdamState<T>,
    params: &mut P,
    grads: &P,
) -> Result<(), NnError> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkernel::ParamVec;

    fn pv(data: Vec<f64>) -> ParamVec<f64> {
        ParamVec {
            name: "p".into(),
            data,
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = pv(vec![1.0, -2.0, 3.0]);
        let g = pv(vec![0.0; 3]);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        for _ in 0..10 {
            s.step(&mut p, &g).unwrap();
        }
        assert_eq!(p.data, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn constant_gradient_update_approaches_learning_rate() {
        // With g constant, m̂ = g and v̂ = g² exactly, so each step moves by
        // lr·|g| / (|g| + ε).
        let lr = 1e-3;
        let mut p = pv(vec![0.0]);
        let g = pv(vec![0.25]);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        let mut prev = 0.0;
        for step in 0..200 {
            s.step(&mut p, &g).unwrap();
            let delta = prev - p.data[0];
            prev = p.data[0];
            if step > 100 {
                let expected = lr * 0.25 / (0.25 + 1e-8);
                assert!((delta - expected).abs() < 1e-12, "step {step}: {delta}");
            }
        }
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let run = || {
            let mut p = pv(vec![0.5, -0.5]);
            let mut s = AdamState::new(AdamConfig::default(), &p);
            for i in 0..50 {
                let g = pv(vec![(i as f64).sin(), (i as f64 * 0.3).cos()]);
                s.step(&mut p, &g).unwrap();
            }
            p.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_update() {
        let mut p = pv(vec![1.0, 1.0]);
        let g = pv(vec![0.1, f64::NAN]);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        let err = s.step(&mut p, &g).unwrap_err();
        assert_eq!(err, NnError::NonFiniteGradient { block: "p".into() });
        assert_eq!(p.data, vec![1.0, 1.0]);
        assert_eq!(s.step, 0);
    }
}
