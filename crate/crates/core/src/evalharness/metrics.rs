use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::linalg::Mat;

fn check_lengths(y_true: &[usize], y_pred: &[usize]) -> Result<(), EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput("labels"));
    }
    Ok(())
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64, EvalError> {
    check_lengths(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// `(f1, support)` per class id up to the largest label seen in either
/// vector. A class with no true and no predicted positives scores 0.
pub fn per_class_f1(y_true: &[usize], y_pred: &[usize]) -> Result<Vec<(f64, usize)>, EvalError> {
    check_lengths(y_true, y_pred)?;
    let n = y_true.iter().chain(y_pred).max().map_or(0, |m| m + 1);
    let (mut tp, mut fp, mut fn_) = (vec![0usize; n], vec![0usize; n], vec![0usize; n]);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    Ok((0..n)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            let f1 = if tp[c] == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            };
            (f1, tp[c] + fn_[c])
        })
        .collect())
}

/// Per-class F1 averaged with weights equal to each class's true support.
pub fn weighted_f1(y_true: &[usize], y_pred: &[usize]) -> Result<f64, EvalError> {
    let per_class = per_class_f1(y_true, y_pred)?;
    let total = y_true.len() as f64;
    Ok(per_class
        .iter()
        .map(|&(f1, support)| f1 * support as f64)
        .sum::<f64>()
        / total)
}

/// Fraction of rows whose true class ranks within the top `k` scores. Ties
/// rank the lower class index first.
pub fn topk_accuracy(scores: &Mat<f64>, y_true: &[usize], k: usize) -> Result<f64, EvalError> {
    if scores.rows() != y_true.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.rows(),
            right: y_true.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput("labels"));
    }
    if k > scores.cols() {
        return Err(EvalError::TopKTooLarge {
            k,
            classes: scores.cols(),
        });
    }
    let mut hits = 0;
    for (i, &t) in y_true.iter().enumerate() {
        if t >= scores.cols() {
            return Err(EvalError::LabelOutOfRange {
                label: t,
                classes: scores.cols(),
            });
        }
        let row = scores.row(i);
        let rank = row
            .iter()
            .enumerate()
            .filter(|&(j, &s)| s > row[t] || (s == row[t] && j < t))
            .count();
        hits += usize::from(rank < k);
    }
    Ok(hits as f64 / y_true.len() as f64)
}

/// Rows are true classes, columns predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn support(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Each row divided by its support; rows without support stay zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self, names: &[String], normalized: bool) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["true\\pred".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        let norm = self.normalized();
        for (i, row) in self.counts.iter().enumerate() {
            let mut rec = vec![names.get(i).cloned().unwrap_or_else(|| i.to_string())];
            if normalized {
                rec.extend(norm[i].iter().map(|v| v.to_string()));
            } else {
                rec.extend(row.iter().map(|v| v.to_string()));
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_weighted_f1() {
        let f = weighted_f1(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap();
        // Class 0: tp 2, fp 0, fn 1 -> F1 = 4/5. Class 1: tp 1, fp 1, fn 0 -> F1 = 2/3.
        // Weighted: 0.75·4/5 + 0.25·2/3 = 23/30.
        let pc = per_class_f1(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap();
        assert!(
            (pc[0].0 - 0.8).abs() <= f64::EPSILON && (pc[1].0 - 2.0 / 3.0).abs() <= f64::EPSILON
        );
        assert!((f - 23.0 / 30.0).abs() <= 4.0 * f64::EPSILON);
        // All-majority prediction: class 0 F1 = 6/7, class 1 F1 = 0.
        let g = weighted_f1(&[0, 0, 0, 1], &[0, 0, 0, 0]).unwrap();
        assert!((g - 0.75 * 6.0 / 7.0).abs() <= 4.0 * f64::EPSILON);
        assert_eq!(weighted_f1(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert!(weighted_f1(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn majority_prediction_on_imbalance() {
        let y: Vec<usize> = std::iter::repeat_n(0, 4073)
            .chain(std::iter::repeat_n(1, 729))
            .collect();
        let pred = vec![0; y.len()];
        let acc = accuracy(&y, &pred).unwrap();
        let f1 = weighted_f1(&y, &pred).unwrap();
        // F1_majority = 2·4073 / (2·4073 + 729), weighted by 4073/4802.
        let expected = (4073.0 / 4802.0) * (2.0 * 4073.0 / (2.0 * 4073.0 + 729.0));
        assert!((f1 - expected).abs() < 1e-12);
        assert!(acc - f1 > 0.05);
    }

    #[test]
    fn topk_fixture() {
        let scores = Mat::from_vec(3, 3, vec![0.1, 0.7, 0.2, 0.5, 0.3, 0.2, 0.3, 0.3, 0.4]);
        let y = [1, 0, 0];
        // Ranks of the true class: 0, 0, 1.
        assert!((topk_accuracy(&scores, &y, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(topk_accuracy(&scores, &y, 2).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&scores, &y, 3).unwrap(), 1.0);
        assert!(topk_accuracy(&scores, &y, 4).is_err());
        // Ties go to the lower index.
        let tied = Mat::from_vec(1, 3, vec![0.3, 0.3, 0.1]);
        assert_eq!(topk_accuracy(&tied, &[0], 1).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&tied, &[1], 1).unwrap(), 0.0);
    }

    #[test]
    fn confusion_normalization() {
        let mut m = ConfusionMatrix::new(3);
        m.add(0, 0);
        m.add(0, 1);
        m.add(1, 1);
        let n = m.normalized();
        assert_eq!(n[0], vec![0.5, 0.5, 0.0]);
        assert_eq!(n[2], vec![0.0; 3]);
        assert_eq!(m.support(), vec![2, 1, 0]);
        assert!(m
            .to_csv(&["a".into(), "b".into(), "c".into()], false)
            .starts_with("true\\pred,a,b,c\n"));
    }

    proptest! {
        #[test]
        fn f1_bounds_and_binary_symmetry(pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..80)) {
            let (t, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let f = weighted_f1(&t, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn topk_monotone(rows in 1usize..20, cols in 1usize..8, seed: u64) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let scores = Mat::from_fn(rows, cols, |_, _| f64::from(rng.random_range(0..4u8)));
            let y: Vec<usize> = (0..rows).map(|_| rng.random_range(0..cols)).collect();
            let mut prev = 0.0;
            for k in 1..=cols {
                let a = topk_accuracy(&scores, &y, k).unwrap();
                prop_assert!(a >= prev);
                prev = a;
            }
            prop_assert_eq!(prev, 1.0);
            let argmax: Vec<usize> = (0..rows).map(|i| {
                let r = scores.row(i);
                (0..cols).fold(0, |b, j| if r[j] > r[b] { j } else { b })
            }).collect();
            prop_assert_eq!(topk_accuracy(&scores, &y, 1).unwrap(), accuracy(&y, &argmax).unwrap());
        }
    }

    #[test]
    fn balanced_symmetric_binary_equals_positive_f1() {
        // Confusion symmetric: one false positive and one false negative.
        let t = [1, 1, 1, 0, 0, 0];
        let p = [1, 1, 0, 1, 0, 0];
        let pc = per_class_f1(&t, &p).unwrap();
        assert!((weighted_f1(&t, &p).unwrap() - pc[1].0).abs() < 1e-15);
    }
}
