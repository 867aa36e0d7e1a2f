use crate::error::{Error, Result};
use crate::metrics::ROW_SUM_TOLERANCE;
use crate::tensor::{Scalar, Tensor};

/// Lower clamp applied to probabilities before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `−ln(p)` for the probability assigned to the true class, with `p`
/// clamped to `[1e-12, 1]`.
pub fn sample_loss(p_true: f64) -> f64 {
    // abs turns the -0.0 at p = 1 into 0.0
    (-p_true.clamp(PROB_FLOOR, 1.0).ln()).abs()
}

/// Mean categorical cross-entropy and its gradient with respect to the
/// pre-softmax logits, `(probs − onehot) / n`.
pub fn categorical_cross_entropy<T: Scalar>(probs: &Tensor<T>, onehot: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    probs.same_shape(onehot, "cross-entropy")?;
    let (n, k) = probs.dims2()?;
    let mut total = 0.0f64;
    for (i, (p, y)) in probs.data().chunks(k).zip(onehot.data().chunks(k)).enumerate() {
        let hot: Vec<usize> = (0..k).filter(|&j| y[j] == T::one()).collect();
        if hot.len() != 1 || y.iter().any(|&v| v != T::one() && v != T::zero()) {
            return Err(Error::Label(format!("row {i} is not a one-hot vector")));
        }
        let sum: f64 = p.iter().map(|v| v.as_f64()).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::Label(format!("probability row {i} sums to {sum}")));
        }
        total += sample_loss(p[hot[0]].as_f64());
    }
    let inv_n = T::from_f64(1.0 / n as f64);
    let grad = probs
        .data()
        .iter()
        .zip(onehot.data())
        .map(|(&p, &y)| (p - y) * inv_n)
        .collect();
    Ok((total / n as f64, Tensor::from_vec(probs.shape(), grad)?))
}
