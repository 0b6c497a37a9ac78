//! Exact O(n²) t-SNE with per-point bandwidth calibration.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::VizError;
use crate::baselines::{randomized_svd, SvdConfig};
use crate::linalg::{CsrMatrix, Mat};
use crate::seeding::derive_rng;

pub const MIN_POINTS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    /// Inputs wider than this are first reduced by PCA.
    pub pca_dims: usize,
    /// Allowed |achieved perplexity − target| per point.
    pub perplexity_tol: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            pca_dims: 50,
            perplexity_tol: 1e-5,
        }
    }
}

pub struct TsneOutput {
    /// n × 2, centered.
    pub coords: Mat<f64>,
    /// Achieved perplexity of each conditional distribution.
    pub perplexities: Vec<f64>,
    /// KL(P‖Q) after each iteration (P without exaggeration).
    pub kl_trace: Vec<f64>,
}

/// Centers the rows and projects onto the top `dims` principal axes.
/// Returns the centered input unchanged when it is already narrow enough.
pub fn pca_reduce(x: &Mat<f64>, dims: usize, seed: u64) -> Mat<f64> {
    let (n, d) = (x.rows(), x.cols());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        crate::linalg::axpy(1.0 / n as f64, x.row(i), &mut mean);
    }
    let centered = Mat::from_fn(n, d, |i, j| x.get(i, j) - mean[j]);
    if d <= dims {
        return centered;
    }
    let rank = dims.min(n);
    let svd = randomized_svd(
        &CsrMatrix::from_dense(&centered),
        rank,
        &SvdConfig::default(),
        &mut derive_rng(seed, "pca"),
    )
    .expect("rank bounded by matrix shape");
    Mat::from_fn(n, rank, |i, j| svd.u.get(i, j) * svd.s[j])
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Conditional distribution of one point for precision `beta`, with its
/// perplexity. Distances are shifted by their minimum for stability.
fn conditional(dists: &[f64], i: usize, beta: f64, min_d: f64) -> (Vec<f64>, f64) {
    let mut p: Vec<f64> = dists
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            if j == i {
                0.0
            } else {
                (-beta * (d - min_d)).exp()
            }
        })
        .collect();
    let sum: f64 = p.iter().sum();
    let mut entropy = 0.0;
    for v in &mut p {
        *v /= sum;
        if *v > 0.0 {
            entropy -= *v * v.ln();
        }
    }
    (p, entropy.exp())
}

/// Bisection on log(beta); perplexity decreases as beta grows.
fn calibrate_row(dists: &[f64], i: usize, target: f64, tol: f64) -> (Vec<f64>, f64) {
    let min_d = dists
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let spread = dists.iter().copied().fold(0.0, f64::max) - min_d;
    let scale = spread.max(1e-300);
    let (mut lo, mut hi) = ((1e-20 / scale).ln(), (1e20 / scale).ln());
    let mut best = conditional(dists, i, 1.0 / scale, min_d);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        best = conditional(dists, i, mid.exp(), min_d);
        if (best.1 - target).abs() <= tol * 0.1 {
            break;
        }
        if best.1 > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// Adds 1e-9-scale jitter to repeated rows so every pair has a positive
/// distance.
fn jitter_duplicates(x: &mut Mat<f64>, seed: u64) {
    let mut rng = derive_rng(seed, "tsne-jitter");
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for i in 0..x.rows() {
        let key: Vec<u64> = x.row(i).iter().map(|v| v.to_bits()).collect();
        if seen.insert(key, i).is_some() {
            for v in x.row_mut(i) {
                *v += 1e-9 * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
}

pub fn tsne_project(vectors: &Mat<f64>, config: &TsneConfig) -> Result<TsneOutput, VizError> {
    let n = vectors.rows();
    if n < MIN_POINTS {
        return Err(VizError::TooFewPoints {
            min: MIN_POINTS,
            got: n,
        });
    }
    let limit = (n as f64 - 1.0) / 3.0;
    if !(config.perplexity > 0.0) || config.perplexity >= limit {
        return Err(VizError::PerplexityTooLarge {
            perplexity: config.perplexity,
            limit,
        });
    }
    if !(config.learning_rate > 0.0) || config.pca_dims == 0 || !(config.exaggeration >= 1.0) {
        return Err(VizError::InvalidConfig(
            "learning_rate and pca_dims must be positive, exaggeration at least 1".into(),
        ));
    }
    if vectors.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(VizError::NonFinite);
    }
    let mut x = pca_reduce(vectors, config.pca_dims, config.seed);
    jitter_duplicates(&mut x, config.seed);

    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = (0..n).map(|j| sq_dist(x.row(i), x.row(j))).collect();
            calibrate_row(&d, i, config.perplexity, config.perplexity_tol)
        })
        .collect();
    let perplexities = rows.iter().map(|r| r.1).collect();
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = ((rows[i].0[j] + rows[j].0[i]) / (2.0 * n as f64)).max(1e-12);
        }
        p[i * n + i] = 0.0;
    }

    let mut rng = derive_rng(config.seed, "tsne-init");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            [
                1e-2 * rng.sample::<f64, _>(StandardNormal),
                1e-2 * rng.sample::<f64, _>(StandardNormal),
            ]
        })
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_trace = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let exaggerate = if it < config.exaggeration_iters {
            config.exaggeration
        } else {
            1.0
        };
        let momentum = if it < config.exaggeration_iters {
            0.5
        } else {
            0.8
        };
        let (kl, grads) = kl_and_gradient(&p, &y, exaggerate);
        kl_trace.push(kl);
        for i in 0..n {
            for d in 0..2 {
                let same_sign = (grads[i][d] > 0.0) == (velocity[i][d] > 0.0);
                gains[i][d] = if same_sign {
                    (gains[i][d] * 0.8).max(0.01)
                } else {
                    gains[i][d] + 0.2
                };
                velocity[i][d] =
                    momentum * velocity[i][d] - config.learning_rate * gains[i][d] * grads[i][d];
                y[i][d] += velocity[i][d];
            }
        }
        center(&mut y);
    }
    center(&mut y);
    Ok(TsneOutput {
        coords: Mat::from_fn(n, 2, |i, j| y[i][j]),
        perplexities,
        kl_trace,
    })
}

/// KL(P‖Q) for the unexaggerated P, and the gradient for `exaggeration · P`.
fn kl_and_gradient(p: &[f64], y: &[[f64; 2]], exaggeration: f64) -> (f64, Vec<[f64; 2]>) {
    let n = y.len();
    let num: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                0.0
            } else {
                1.0 / (1.0 + sq_dist(&y[i], &y[j]))
            }
        })
        .collect();
    let z: f64 = num.iter().sum();
    let grads = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num[i * n + j];
                let coef = 4.0 * (exaggeration * p[i * n + j] - w / z) * w;
                g[0] += coef * (y[i][0] - y[j][0]);
                g[1] += coef * (y[i][1] - y[j][1]);
            }
            g
        })
        .collect();
    let kl = p
        .iter()
        .zip(&num)
        .filter(|(pv, _)| **pv > 0.0)
        .map(|(pv, w)| pv * (pv / (w / z).max(f64::MIN_POSITIVE)).ln())
        .sum();
    (kl, grads)
}

fn center(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let mean = y
        .iter()
        .fold([0.0; 2], |m, p| [m[0] + p[0] / n, m[1] + p[1] / n]);
    for p in y {
        p[0] -= mean[0];
        p[1] -= mean[1];
    }
}

/// Mean silhouette coefficient under Euclidean distance. Points in
/// singleton clusters score 0.
pub fn silhouette(points: &Mat<f64>, labels: &[usize]) -> f64 {
    let n = points.rows();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let total: f64 = (0..n)
        .map(|i| {
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for j in 0..n {
                if i != j {
                    sums[labels[j]] += sq_dist(points.row(i), points.row(j)).sqrt();
                    counts[labels[j]] += 1;
                }
            }
            let own = labels[i];
            if counts[own] == 0 {
                return 0.0;
            }
            let a = sums[own] / counts[own] as f64;
            let b = (0..k)
                .filter(|&c| c != own && counts[c] > 0)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            (b - a) / a.max(b)
        })
        .sum();
    total / n as f64
}
