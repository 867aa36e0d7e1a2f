use crate::error::Result;
use crate::layers::{ModelParams, ModelSpec};
use crate::rng::Rng;
use crate::tensor::Scalar;

/// Glorot-uniform limit `√(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform weights, zero biases. Convolution fans count the receptive
/// field: `fan_in = c·k²`, `fan_out = filters·k²`. Weights are drawn in
/// parameter-name order.
pub fn init_params<T: Scalar>(spec: &ModelSpec, rng: &mut Rng) -> Result<ModelParams<T>> {
    let mut params = ModelParams::<T>::zeros(spec)?;
    let mut fill = |data: &mut [T], limit: f64| {
        for v in data {
            *v = T::from_f64(rng.uniform(-limit, limit));
        }
    };
    for layer in &mut params.conv {
        let (kh, kw) = layer.kernel();
        let limit = glorot_limit(layer.in_channels() * kh * kw, layer.filters() * kh * kw);
        fill(layer.weights.data_mut(), limit);
    }
    for dense in [&mut params.hidden, &mut params.output] {
        let limit = glorot_limit(dense.in_dim(), dense.out_dim());
        fill(dense.weights.data_mut(), limit);
    }
    Ok(params)
}
