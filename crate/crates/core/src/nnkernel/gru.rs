//! Gated recurrent unit with backpropagation through time.
//!
//! Recurrence (reset gate applied inside the candidate's recurrent term):
//!
//! ```text
//! z_t = σ(W_z x_t + U_z h_{t-1} + b_z)
//! r_t = σ(W_r x_t + U_r h_{t-1} + b_r)
//! c_t = tanh(W_h x_t + U_h (r_t ⊙ h_{t-1}) + b_h)
//! h_t = (1 - z_t) ⊙ h_{t-1} + z_t ⊙ c_t
//! ```
//!
//! Masked steps carry the previous state through unchanged and receive no
//! gradient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init, NnError, ParamView, ParamViewMut, Params};
use crate::linalg::{Mat, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct GruCell<T> {
    pub w_z: Mat<T>,
    pub w_r: Mat<T>,
    pub w_h: Mat<T>,
    pub u_z: Mat<T>,
    pub u_r: Mat<T>,
    pub u_h: Mat<T>,
    pub b_z: Vec<T>,
    pub b_r: Vec<T>,
    pub b_h: Vec<T>,
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> GruCell<T> {
    /// Orthogonal recurrent matrices, Glorot-uniform input matrices, zero biases.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w_z: init::glorot_uniform(hidden, input, rng),
            w_r: init::glorot_uniform(hidden, input, rng),
            w_h: init::glorot_uniform(hidden, input, rng),
            u_z: init::orthogonal(hidden, rng),
            u_r: init::orthogonal(hidden, rng),
            u_h: init::orthogonal(hidden, rng),
            b_z: vec![T::zero(); hidden],
            b_r: vec![T::zero(); hidden],
            b_h: vec![T::zero(); hidden],
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_z: Mat::zeros(hidden, input),
            w_r: Mat::zeros(hidden, input),
            w_h: Mat::zeros(hidden, input),
            u_z: Mat::zeros(hidden, hidden),
            u_r: Mat::zeros(hidden, hidden),
            u_h: Mat::zeros(hidden, hidden),
            b_z: vec![T::zero(); hidden],
            b_r: vec![T::zero(); hidden],
            b_h: vec![T::zero(); hidden],
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_z.rows()
    }

    pub fn cast<U: Scalar>(&self) -> GruCell<U> {
        let m = |m: &Mat<T>| {
            Mat::from_vec(
                m.rows(),
                m.cols(),
                m.as_slice()
                    .iter()
                    .map(|v| U::of(v.to_f64().unwrap()))
                    .collect(),
            )
        };
        let v = |v: &[T]| v.iter().map(|x| U::of(x.to_f64().unwrap())).collect();
        GruCell {
            w_z: m(&self.w_z),
            w_r: m(&self.w_r),
            w_h: m(&self.w_h),
            u_z: m(&self.u_z),
            u_r: m(&self.u_r),
            u_h: m(&self.u_h),
            b_z: v(&self.b_z),
            b_r: v(&self.b_r),
            b_h: v(&self.b_h),
        }
    }
}

impl<T: Scalar> Params<T> for GruCell<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        fn mat<'a, T: Scalar>(name: &str, m: &'a Mat<T>) -> ParamView<'a, T> {
            ParamView {
                name: name.to_string(),
                shape: vec![m.rows(), m.cols()],
                data: m.as_slice(),
            }
        }
        fn vec<'a, T>(name: &str, v: &'a [T]) -> ParamView<'a, T> {
            ParamView {
                name: name.to_string(),
                shape: vec![v.len()],
                data: v,
            }
        }
        vec![
            mat("w_z", &self.w_z),
            mat("w_r", &self.w_r),
            mat("w_h", &self.w_h),
            mat("u_z", &self.u_z),
            mat("u_r", &self.u_r),
            mat("u_h", &self.u_h),
            vec("b_z", &self.b_z),
            vec("b_r", &self.b_r),
            vec("b_h", &self.b_h),
        ]
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        fn mat<'a, T: Scalar>(name: &str, m: &'a mut Mat<T>) -> ParamViewMut<'a, T> {
            let shape = vec![m.rows(), m.cols()];
            ParamViewMut {
                name: name.to_string(),
                shape,
                data: m.as_mut_slice(),
            }
        }
        fn vec<'a, T>(name: &str, v: &'a mut [T]) -> ParamViewMut<'a, T> {
            ParamViewMut {
                name: name.to_string(),
                shape: vec![v.len()],
                data: v,
            }
        }
        vec![
            mat("w_z", &mut self.w_z),
            mat("w_r", &mut self.w_r),
            mat("w_h", &mut self.w_h),
            mat("u_z", &mut self.u_z),
            mat("u_r", &mut self.u_r),
            mat("u_h", &mut self.u_h),
            vec("b_z", &mut self.b_z),
            vec("b_r", &mut self.b_r),
            vec("b_h", &mut self.b_h),
        ]
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.input_size(), self.hidden_size())
    }
}

#[derive(Clone, Debug)]
struct GruStep<T> {
    active: bool,
    h_prev: Vec<T>,
    z: Vec<T>,
    r: Vec<T>,
    cand: Vec<T>,
    rh: Vec<T>,
    h: Vec<T>,
}

/// Forward cache for one sequence.
#[derive(Clone, Debug)]
pub struct GruTrace<T> {
    steps: Vec<GruStep<T>>,
}

impl<T: Scalar> GruTrace<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn state(&self, t: usize) -> &[T] {
        &self.steps[t].h
    }

    pub fn states(&self) -> impl Iterator<Item = &[T]> {
        self.steps.iter().map(|s| s.h.as_slice())
    }

    pub fn final_state(&self) -> &[T] {
        &self.steps.last().expect("trace is never empty").h
    }

    pub fn is_active(&self, t: usize) -> bool {
        self.steps[t].active
    }
}

/// Gradient arriving at the hidden states from downstream.
pub enum Upstream<'a, T> {
    /// Only the final state feeds the loss.
    Final(&'a [T]),
    /// One gradient per time step.
    PerStep(&'a [Vec<T>]),
}

pub struct GruInputGrads<T> {
    pub dx: Vec<Vec<T>>,
    pub dh0: Vec<T>,
}

pub fn gru_forward<T: Scalar>(
    cell: &GruCell<T>,
    sequence: &[&[T]],
    h0: &[T],
    mask: Option<&[bool]>,
) -> Result<GruTrace<T>, NnError> {
    if sequence.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let hidden = cell.hidden_size();
    if h0.len() != hidden {
        return Err(NnError::ShapeMismatch {
            what: "gru initial state",
            expected: hidden,
            got: h0.len(),
        });
    }
    if let Some(m) = mask {
        if m.len() != sequence.len() {
            return Err(NnError::ShapeMismatch {
                what: "gru mask",
                expected: sequence.len(),
                got: m.len(),
            });
        }
    }
    let mut steps = Vec::with_capacity(sequence.len());
    let mut h_prev = h0.to_vec();
    for (t, x) in sequence.iter().enumerate() {
        if x.len() != cell.input_size() {
            return Err(NnError::ShapeMismatch {
                what: "gru input",
                expected: cell.input_size(),
                got: x.len(),
            });
        }
        let active = mask.map_or(true, |m| m[t]);
        if !active {
            steps.push(GruStep {
                active,
                h_prev: h_prev.clone(),
                z: Vec::new(),
                r: Vec::new(),
                cand: Vec::new(),
                rh: Vec::new(),
                h: h_prev.clone(),
            });
            continue;
        }
        let mut z = cell.b_z.clone();
        cell.w_z.gemv_acc(x, &mut z);
        cell.u_z.gemv_acc(&h_prev, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut r = cell.b_r.clone();
        cell.w_r.gemv_acc(x, &mut r);
        cell.u_r.gemv_acc(&h_prev, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let rh: Vec<T> = r.iter().zip(&h_prev).map(|(&a, &b)| a * b).collect();
        let mut cand = cell.b_h.clone();
        cell.w_h.gemv_acc(x, &mut cand);
        cell.u_h.gemv_acc(&rh, &mut cand);
        cand.iter_mut().for_each(|v| *v = v.tanh());

        let h: Vec<T> = (0..hidden)
            .map(|i| (T::one() - z[i]) * h_prev[i] + z[i] * cand[i])
            .collect();
        steps.push(GruStep {
            active,
            h_prev: std::mem::replace(&mut h_prev, h.clone()),
            z,
            r,
            cand,
            rh,
            h,
        });
    }
    Ok(GruTrace { steps })
}

/// Exact BPTT. Parameter gradients are accumulated into `grads`.
pub fn gru_backward<T: Scalar>(
    cell: &GruCell<T>,
    sequence: &[&[T]],
    trace: &GruTrace<T>,
    upstream: Upstream<'_, T>,
    grads: &mut GruCell<T>,
) -> GruInputGrads<T> {
    let hidden = cell.hidden_size();
    let len = trace.len();
    let mut dx = vec![vec![T::zero(); cell.input_size()]; len];
    let mut carry = vec![T::zero(); hidden];
    if let Upstream::Final(g) = upstream {
        carry.copy_from_slice(g);
    }
    for t in (0..len).rev() {
        let step = &trace.steps[t];
        let mut dh = carry.clone();
        if let Upstream::PerStep(gs) = upstream {
            for (d, &g) in dh.iter_mut().zip(&gs[t]) {
                *d += g;
            }
        }
        if !step.active {
            carry = dh;
            continue;
        }
        let x = sequence[t];
        let mut da_h = vec![T::zero(); hidden];
        let mut da_z = vec![T::zero(); hidden];
        let mut dh_prev = vec![T::zero(); hidden];
        for i in 0..hidden {
            let z = step.z[i];
            let c = step.cand[i];
            let dc = dh[i] * z;
            let dz = dh[i] * (c - step.h_prev[i]);
            dh_prev[i] = dh[i] * (T::one() - z);
            da_h[i] = dc * (T::one() - c * c);
            da_z[i] = dz * z * (T::one() - z);
        }
        // Candidate path.
        grads.w_h.rank1_acc(&da_h, x);
        grads.u_h.rank1_acc(&da_h, &step.rh);
        for (b, &d) in grads.b_h.iter_mut().zip(&da_h) {
            *b += d;
        }
        let mut d_rh = vec![T::zero(); hidden];
        cell.u_h.gemv_t_acc(&da_h, &mut d_rh);
        let mut da_r = vec![T::zero(); hidden];
        for i in 0..hidden {
            let r = step.r[i];
            dh_prev[i] += d_rh[i] * r;
            da_r[i] = d_rh[i] * step.h_prev[i] * r * (T::one() - r);
        }
        // Update gate.
        grads.w_z.rank1_acc(&da_z, x);
        grads.u_z.rank1_acc(&da_z, &step.h_prev);
        for (b, &d) in grads.b_z.iter_mut().zip(&da_z) {
            *b += d;
        }
        cell.u_z.gemv_t_acc(&da_z, &mut dh_prev);
        // Reset gate.
        grads.w_r.rank1_acc(&da_r, x);
        grads.u_r.rank1_acc(&da_r, &step.h_prev);
        for (b, &d) in grads.b_r.iter_mut().zip(&da_r) {
            *b += d;
        }
        cell.u_r.gemv_t_acc(&da_r, &mut dh_prev);

        let dxt = &mut dx[t];
        cell.w_z.gemv_t_acc(&da_z, dxt);
        cell.w_r.gemv_t_acc(&da_r, dxt);
        cell.w_h.gemv_t_acc(&da_h, dxt);
        carry = dh_prev;
    }
    GruInputGrads { dx, dh0: carry }
}

/// How the two directional state sequences are reduced to one vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// `[forward final state ‖ backward final state]`
    #[default]
    Final,
    /// `[mean forward state ‖ mean backward state]` over active steps.
    Mean,
}

pub struct BiGruTrace<T> {
    pub forward: GruTrace<T>,
    pub backward: GruTrace<T>,
    pooling: Pooling,
}

/// Runs `fwd` over the sequence and `bwd` over its reverse and pools both.
/// Output width is `2 × hidden`.
pub fn bigru_encode<T: Scalar>(
    fwd: &GruCell<T>,
    bwd: &GruCell<T>,
    sequence: &[&[T]],
    pooling: Pooling,
) -> Result<(Vec<T>, BiGruTrace<T>), NnError> {
    let reversed: Vec<&[T]> = sequence.iter().rev().copied().collect();
    let h0f = vec![T::zero(); fwd.hidden_size()];
    let h0b = vec![T::zero(); bwd.hidden_size()];
    let forward = gru_forward(fwd, sequence, &h0f, None)?;
    let backward = gru_forward(bwd, &reversed, &h0b, None)?;
    let mut out = Vec::with_capacity(fwd.hidden_size() + bwd.hidden_size());
    match pooling {
        Pooling::Final => {
            out.extend_from_slice(forward.final_state());
            out.extend_from_slice(backward.final_state());
        }
        Pooling::Mean => {
            out.extend(mean_state(&forward));
            out.extend(mean_state(&backward));
        }
    }
    Ok((
        out,
        BiGruTrace {
            forward,
            backward,
            pooling,
        },
    ))
}

fn mean_state<T: Scalar>(trace: &GruTrace<T>) -> Vec<T> {
    let n = T::of(trace.len() as f64);
    let mut acc = vec![T::zero(); trace.state(0).len()];
    for s in trace.states() {
        for (a, &v) in acc.iter_mut().zip(s) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|v| *v = *v / n);
    acc
}

/// Backward pass for [`bigru_encode`]. Returns `dL/dx_t` in original order.
pub fn bigru_backward<T: Scalar>(
    fwd: &GruCell<T>,
    bwd: &GruCell<T>,
    sequence: &[&[T]],
    trace: &BiGruTrace<T>,
    d_out: &[T],
    grads_fwd: &mut GruCell<T>,
    grads_bwd: &mut GruCell<T>,
) -> Vec<Vec<T>> {
    let hf = fwd.hidden_size();
    let (d_f, d_b) = d_out.split_at(hf);
    let reversed: Vec<&[T]> = sequence.iter().rev().copied().collect();
    let (gf, gb) = match trace.pooling {
        Pooling::Final => (
            gru_backward(
                fwd,
                sequence,
                &trace.forward,
                Upstream::Final(d_f),
                grads_fwd,
            ),
            gru_backward(
                bwd,
                &reversed,
                &trace.backward,
                Upstream::Final(d_b),
                grads_bwd,
            ),
        ),
        Pooling::Mean => {
            let n = T::of(sequence.len() as f64);
            let per_f: Vec<Vec<T>> = vec![d_f.iter().map(|&g| g / n).collect(); sequence.len()];
            let per_b: Vec<Vec<T>> = vec![d_b.iter().map(|&g| g / n).collect(); sequence.len()];
            (
                gru_backward(
                    fwd,
                    sequence,
                    &trace.forward,
                    Upstream::PerStep(&per_f),
                    grads_fwd,
                ),
                gru_backward(
                    bwd,
                    &reversed,
                    &trace.backward,
                    Upstream::PerStep(&per_b),
                    grads_bwd,
                ),
            )
        }
    };
    let len = sequence.len();
    gf.dx
        .into_iter()
        .enumerate()
        .map(|(t, mut d)| {
            for (a, &b) in d.iter_mut().zip(&gb.dx[len - 1 - t]) {
                *a += b;
            }
            d
        })
        .collect()
}
