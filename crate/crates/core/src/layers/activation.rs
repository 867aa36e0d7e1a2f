use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct ReluCache {
    /// `true` where the input was strictly positive.
    pub active: Vec<bool>,
    pub shape: Vec<usize>,
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, ReluCache) {
    let active: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
    let y = x.map(|v| if v > T::zero() { v } else { T::zero() });
    (
        y,
        ReluCache {
            active,
            shape: x.shape().to_vec(),
        },
    )
}

/// Passes `dy` through where the input was positive. The derivative at exactly
/// zero is taken as zero.
pub fn relu_backward<T: Scalar>(dy: &Tensor<T>, cache: &ReluCache) -> Result<Tensor<T>> {
    if dy.shape() != cache.shape.as_slice() {
        return Err(Error::shape(format!(
            "relu upstream gradient {:?} does not match {:?}",
            dy.shape(),
            cache.shape
        )));
    }
    let data = dy
        .data()
        .iter()
        .zip(&cache.active)
        .map(|(&g, &on)| if on { g } else { T::zero() })
        .collect();
    Tensor::from_vec(dy.shape(), data)
}

/// Row-wise softmax over `[n, k]` logits with max subtraction.
pub fn softmax<T: Scalar>(z: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = z.dims2()?;
    if k < 2 {
        return Err(Error::shape(format!("softmax needs at least 2 classes, got {k}")));
    }
    if !z.is_finite() {
        return Err(Error::NumericInput("softmax"));
    }
    let mut out = z.data().to_vec();
    for row in out.chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    Tensor::from_vec(z.shape(), out)
}

/// Gradient with respect to the logits given a gradient with respect to the
/// probabilities: `dz_j = p_j · (dp_j − Σ_i dp_i·p_i)`.
pub fn softmax_backward<T: Scalar>(dprobs: &Tensor<T>, probs: &Tensor<T>) -> Result<Tensor<T>> {
    dprobs.same_shape(probs, "softmax backward")?;
    let (_, k) = probs.dims2()?;
    let mut out = vec![T::zero(); probs.len()];
    for ((o, dp), p) in out
        .chunks_mut(k)
        .zip(dprobs.data().chunks(k))
        .zip(probs.data().chunks(k))
    {
        let dot = dp.iter().zip(p).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        for j in 0..k {
            o[j] = p[j] * (dp[j] - dot);
        }
    }
    Tensor::from_vec(probs.shape(), out)
}
