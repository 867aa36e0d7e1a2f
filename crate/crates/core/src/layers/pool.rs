use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape4, Tensor};

/// Pooling window and stride.
pub const POOL: usize = 2;

#[derive(Debug, Clone)]
pub struct PoolCache {
    pub input: Shape4,
    /// For every output element, the flat input offset of its window maximum.
    pub argmax: Vec<usize>,
}

/// 2x2 stride-2 max pooling in floor mode; ties go to the first maximum in
/// row-major window order.
pub fn maxpool_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
    let s = x.shape4()?;
    if s.h < POOL || s.w < POOL {
        return Err(Error::shape(format!(
            "max pool needs at least {POOL}x{POOL} input, got {}x{}",
            s.h, s.w
        )));
    }
    let (oh, ow) = (s.h / POOL, s.w / POOL);
    let data = x.data();
    let mut y = Vec::with_capacity(s.n * s.c * oh * ow);
    let mut argmax = Vec::with_capacity(y.capacity());
    for plane in 0..s.n * s.c {
        let base = plane * s.h * s.w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + (POOL * i) * s.w + POOL * j;
                for u in 0..POOL {
                    for v in 0..POOL {
                        let off = base + (POOL * i + u) * s.w + POOL * j + v;
                        if data[off] > data[best] {
                            best = off;
                        }
                    }
                }
                y.push(data[best]);
                argmax.push(best);
            }
        }
    }
    let y = Tensor::from_vec(&[s.n, s.c, oh, ow], y)?;
    Ok((y, PoolCache { input: s, argmax }))
}

pub fn maxpool_backward<T: Scalar>(dy: &Tensor<T>, cache: &PoolCache) -> Result<Tensor<T>> {
    let s = cache.input;
    let expected = [s.n, s.c, s.h / POOL, s.w / POOL];
    if dy.shape() != expected {
        return Err(Error::shape(format!(
            "pool upstream gradient {:?} does not match forward output {expected:?}",
            dy.shape()
        )));
    }
    let mut dx = vec![T::zero(); s.len()];
    for (&off, &g) in cache.argmax.iter().zip(dy.data()) {
        dx[off] += g;
    }
    Tensor::from_vec(&s.to_vec(), dx)
}
