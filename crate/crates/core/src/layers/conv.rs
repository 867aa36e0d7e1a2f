//! Valid-padding, stride-1 convolution lowered onto [`matmul`](crate::tensor::matmul)
//! through per-sample patch matrices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{gather_patches, matmul_into, scatter_patches, transpose_slice, Scalar, Shape4, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T: Scalar = f32> {
    /// `[filters, in_channels, kh, kw]`
    pub weights: Tensor<T>,
    /// `[filters]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let layer = ConvLayer { weights, bias };
        layer.validate()?;
        Ok(layer)
    }

    pub fn zeros(filters: usize, in_channels: usize, kernel: usize) -> Result<Self> {
        Self::new(
            Tensor::zeros(&[filters, in_channels, kernel, kernel])?,
            Tensor::zeros(&[filters])?,
        )
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.weights.rank() != 4 {
            return Err(Error::shape(format!(
                "conv weights must be [filters, c, kh, kw], got {:?}",
                self.weights.shape()
            )));
        }
        if self.bias.shape() != [self.filters()] {
            return Err(Error::shape(format!(
                "conv bias {:?} does not match {} filters",
                self.bias.shape(),
                self.filters()
            )));
        }
        Ok(())
    }

    pub fn filters(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    /// `(kh, kw)`
    pub fn kernel(&self) -> (usize, usize) {
        (self.weights.shape()[2], self.weights.shape()[3])
    }

    fn patch_len(&self) -> usize {
        let (kh, kw) = self.kernel();
        self.in_channels() * kh * kw
    }
}

/// Saved forward state: the input extents and each sample's patch matrix.
#[derive(Debug, Clone)]
pub struct ConvCache<T: Scalar = f32> {
    pub input: Shape4,
    patches: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T: Scalar = f32> {
    pub dx: Tensor<T>,
    pub dweights: Tensor<T>,
    pub dbias: Tensor<T>,
}

pub fn conv2d_forward<T: Scalar>(x: &Tensor<T>, layer: &ConvLayer<T>) -> Result<(Tensor<T>, ConvCache<T>)> {
    let s = x.shape4()?;
    let (kh, kw) = layer.kernel();
    if s.c != layer.in_channels() {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {}",
            layer.in_channels(),
            s.c
        )));
    }
    if kh > s.h || kw > s.w {
        return Err(Error::shape(format!(
            "kernel {kh}x{kw} exceeds input {}x{}",
            s.h, s.w
        )));
    }
    let (oh, ow) = (s.h - kh + 1, s.w - kw + 1);
    let positions = oh * ow;
    let f = layer.filters();
    let k = layer.patch_len();
    let weights = layer.weights.data();
    let bias = layer.bias.data();

    let mut y = vec![T::zero(); s.n * f * positions];
    let patches: Vec<Vec<T>> = y
        .par_chunks_mut(f * positions)
        .zip(x.data().par_chunks(s.sample_len()))
        .map(|(out, sample)| {
            let mut cols = vec![T::zero(); k * positions];
            gather_patches(sample, s, kh, kw, 1, &mut cols, positions, 0);
            for (o, row) in out.chunks_mut(positions).enumerate() {
                row.fill(bias[o]);
            }
            matmul_into(weights, &cols, out, f, k, positions);
            cols
        })
        .collect();

    let y = Tensor::from_vec(&[s.n, f, oh, ow], y)?;
    Ok((y, ConvCache { input: s, patches }))
}

pub fn conv2d_backward<T: Scalar>(
    dy: &Tensor<T>,
    cache: &ConvCache<T>,
    layer: &ConvLayer<T>,
) -> Result<ConvGrads<T>> {
    let s = cache.input;
    let (kh, kw) = layer.kernel();
    let f = layer.filters();
    let k = layer.patch_len();
    if s.c != layer.in_channels() || kh > s.h || kw > s.w {
        return Err(Error::shape("conv cache does not belong to this layer"));
    }
    let (oh, ow) = (s.h - kh + 1, s.w - kw + 1);
    let positions = oh * ow;
    if dy.shape() != [s.n, f, oh, ow] || cache.patches.len() != s.n {
        return Err(Error::shape(format!(
            "conv upstream gradient {:?} does not match forward output {:?}",
            dy.shape(),
            [s.n, f, oh, ow]
        )));
    }
    let weights_t = transpose_slice(layer.weights.data(), f, k);

    let mut dx = vec![T::zero(); s.len()];
    let per_sample: Vec<(Vec<T>, Vec<T>)> = dx
        .par_chunks_mut(s.sample_len())
        .zip(dy.data().par_chunks(f * positions))
        .zip(cache.patches.par_iter())
        .map(|((dx_b, dy_b), cols)| {
            let cols_t = transpose_slice(cols, k, positions);
            let mut dw = vec![T::zero(); f * k];
            matmul_into(dy_b, &cols_t, &mut dw, f, positions, k);

            let mut dcols = vec![T::zero(); k * positions];
            matmul_into(&weights_t, dy_b, &mut dcols, k, f, positions);
            scatter_patches(&dcols, s, kh, kw, dx_b);

            let db = dy_b
                .chunks(positions)
                .map(|row| row.iter().fold(T::zero(), |a, &v| a + v))
                .collect();
            (dw, db)
        })
        .collect();

    // Sample-order reduction keeps the result independent of thread count.
    let mut dweights = vec![T::zero(); f * k];
    let mut dbias = vec![T::zero(); f];
    for (dw, db) in &per_sample {
        for (acc, &g) in dweights.iter_mut().zip(dw) {
            *acc += g;
        }
        for (acc, &g) in dbias.iter_mut().zip(db) {
            *acc += g;
        }
    }

    Ok(ConvGrads {
        dx: Tensor::from_vec(&s.to_vec(), dx)?,
        dweights: Tensor::from_vec(layer.weights.shape(), dweights)?,
        dbias: Tensor::from_vec(&[f], dbias)?,
    })
}
