//! Parameter initialisers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Mat, Scalar};

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_fn(rows, cols, |_, _| T::of(rng.random_range(-limit..limit)))
}

/// Random orthogonal `n × n` matrix (QR of a Gaussian matrix, with the sign
/// convention that makes the distribution uniform over the orthogonal group).
pub fn orthogonal<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<T> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    Mat::from_fn(n, n, |i, j| {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        T::of(q[(i, j)] * sign)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q: Mat<f64> = orthogonal(6, &mut rng);
        let qtq = q.transpose().matmul(&q);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn glorot_respects_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w: Mat<f32> = glorot_uniform(10, 20, &mut rng);
        let limit = (6.0f32 / 30.0).sqrt();
        assert!(w.as_slice().iter().all(|v| v.abs() <= limit));
    }
}
