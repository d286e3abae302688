//! Classifier losses: numerically stable softmax and cross-entropy with the
//! fused backward `dlogits = (p - y) / N`.

use crate::scalar::Scalar;
use ndarray::Array2;

/// Row-wise softmax with max subtraction.
pub fn softmax<F: Scalar>(logits: &Array2<F>) -> Array2<F> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean cross-entropy of one-hot targets given class indices.
pub fn cross_entropy<F: Scalar>(probs: &Array2<F>, targets: &[usize]) -> F {
    debug_assert_eq!(probs.nrows(), targets.len());
    let eps = F::cast(1e-12);
    let mut acc = F::zero();
    for (row, &t) in probs.rows().into_iter().zip(targets) {
        acc = acc - (row[t] + eps).ln();
    }
    acc / F::cast(targets.len() as f64)
}

/// Gradient of mean cross-entropy w.r.t. logits: `(softmax - onehot) / N`.
pub fn cross_entropy_grad<F: Scalar>(probs: &Array2<F>, targets: &[usize]) -> Array2<F> {
    let n = F::cast(targets.len() as f64);
    let mut grad = probs.clone();
    for (mut row, &t) in grad.rows_mut().into_iter().zip(targets) {
        row[t] = row[t] - F::one();
    }
    grad.mapv_inplace(|v| v / n);
    grad
}

/// Mean squared error and its gradient w.r.t. `pred`.
pub fn mse<F: Scalar>(pred: &ndarray::ArrayD<F>, target: F) -> (F, ndarray::ArrayD<F>) {
    let n = F::cast(pred.len() as f64);
    let mut loss = F::zero();
    let grad = pred.mapv(|v| {
        let d = v - target;
        loss = loss + d * d;
        F::cast(2.0) * d / n
    });
    (loss / n, grad)
}
