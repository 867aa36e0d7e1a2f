use crate::error::{Error, Result};
use crate::tensor::{matmul_into, transpose_slice, Scalar, Tensor};

/// Fully connected layer, `y = x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T: Scalar = f32> {
    /// `[in_dim, out_dim]`
    pub weights: Tensor<T>,
    /// `[out_dim]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let (_, out) = weights.dims2()?;
        if bias.shape() != [out] {
            return Err(Error::shape(format!(
                "dense bias {:?} does not match output dimension {out}",
                bias.shape()
            )));
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[in_dim, out_dim])?, Tensor::zeros(&[out_dim])?)
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[1]
    }
}

#[derive(Debug, Clone)]
pub struct DenseCache<T: Scalar = f32> {
    pub input: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T: Scalar = f32> {
    pub dx: Tensor<T>,
    pub dweights: Tensor<T>,
    pub dbias: Tensor<T>,
}

pub fn dense_forward<T: Scalar>(x: &Tensor<T>, layer: &DenseLayer<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
    let (n, d) = x.dims2()?;
    if d != layer.in_dim() {
        return Err(Error::shape(format!(
            "dense layer expects {} inputs, got {d}",
            layer.in_dim()
        )));
    }
    let out = layer.out_dim();
    let mut y = Vec::with_capacity(n * out);
    for _ in 0..n {
        y.extend_from_slice(layer.bias.data());
    }
    matmul_into(x.data(), layer.weights.data(), &mut y, n, d, out);
    Ok((
        Tensor::from_vec(&[n, out], y)?,
        DenseCache { input: x.clone() },
    ))
}

pub fn dense_backward<T: Scalar>(
    dy: &Tensor<T>,
    cache: &DenseCache<T>,
    layer: &DenseLayer<T>,
) -> Result<DenseGrads<T>> {
    let (n, d) = cache.input.dims2()?;
    let out = layer.out_dim();
    if d != layer.in_dim() {
        return Err(Error::shape("dense cache does not belong to this layer"));
    }
    if dy.shape() != [n, out] {
        return Err(Error::shape(format!(
            "dense upstream gradient {:?} does not match forward output {:?}",
            dy.shape(),
            [n, out]
        )));
    }
    let x_t = transpose_slice(cache.input.data(), n, d);
    let mut dw = vec![T::zero(); d * out];
    matmul_into(&x_t, dy.data(), &mut dw, d, n, out);

    let w_t = transpose_slice(layer.weights.data(), d, out);
    let mut dx = vec![T::zero(); n * d];
    matmul_into(dy.data(), &w_t, &mut dx, n, out, d);

    let mut db = vec![T::zero(); out];
    for row in dy.data().chunks(out) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc += g;
        }
    }
    Ok(DenseGrads {
        dx: Tensor::from_vec(&[n, d], dx)?,
        dweights: Tensor::from_vec(&[d, out], dw)?,
        dbias: Tensor::from_vec(&[out], db)?,
    })
}
