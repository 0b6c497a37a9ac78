use crate::linalg::Scalar;

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `target`, with its gradient
/// with respect to the logits (`softmax − one_hot`).
pub fn softmax_xent<T: Scalar>(logits: &[T], target: usize) -> (T, Vec<T>) {
    assert!(
        logits.len() >= 2,
        "softmax cross-entropy needs at least two classes"
    );
    assert!(target < logits.len(), "target class out of range");
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&l| (l - max).exp()).sum();
    let log_z = max + sum.ln();
    let loss = log_z - logits[target];
    let mut grad: Vec<T> = logits.iter().map(|&l| (l - log_z).exp()).collect();
    grad[target] -= T::one();
    (loss, grad)
}
