//! Dense row-major tensors and the handful of primitives the layers need.
//!
//! Images use the `[n, c, h, w]` convention throughout. Every reduction
//! accumulates in a fixed ascending order so results are bitwise reproducible
//! on a given platform.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floating-point element type. `f32` is used for training, `f64` for
/// gradient checks and oracle comparisons.
pub trait Scalar:
    Float + Default + AddAssign + SubAssign + MulAssign + Send + Sync + Debug + Display + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Extents of an image batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Result<Self> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::InvalidShape(vec![n, c, h, w]));
        }
        Ok(Shape4 { n, c, h, w })
    }

    pub fn to_vec(self) -> Vec<usize> {
        vec![self.n, self.c, self.h, self.w]
    }

    /// Elements in one `[c, h, w]` sample.
    pub fn sample_len(self) -> usize {
        self.c * self.h * self.w
    }

    pub fn len(self) -> usize {
        self.n * self.sample_len()
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T: Scalar = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?} [", self.shape)?;
        for (i, v) in self.data.iter().take(SHOWN).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        if self.data.len() > SHOWN {
            write!(f, ", ...")?;
        }
        write!(f, "]")
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > 4 || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    /// Tensor of the given shape with every element equal to `fill`.
    pub fn new(shape: &[usize], fill: T) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![fill; len],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, T::zero())
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Zero tensor with the same shape as `self`.
    pub fn zeros_like(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: vec![T::zero(); self.data.len()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(Error::shape(format!(
                "index {index:?} has rank {}, tensor has rank {}",
                index.len(),
                self.shape.len()
            )));
        }
        let mut off = 0;
        for (&i, &extent) in index.iter().zip(&self.shape) {
            if i >= extent {
                return Err(Error::shape(format!(
                    "index {index:?} out of bounds for shape {:?}",
                    self.shape
                )));
            }
            off = off * extent + i;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<T> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: T) -> Result<()> {
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn shape4(&self) -> Result<Shape4> {
        match *self.shape.as_slice() {
            [n, c, h, w] => Ok(Shape4 { n, c, h, w }),
            _ => Err(Error::shape(format!(
                "expected a rank-4 [n,c,h,w] tensor, got {:?}",
                self.shape
            ))),
        }
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match *self.shape.as_slice() {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(format!(
                "expected a rank-2 tensor, got {:?}",
                self.shape
            ))),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        self.same_shape(other, "add")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Sum in ascending element order.
    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn same_shape(&self, other: &Tensor<T>, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "{what}: shape {:?} does not match {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.dims2()?;
        Ok(Tensor {
            shape: vec![c, r],
            data: transpose_slice(&self.data, r, c),
        })
    }
}

pub(crate) fn transpose_slice<T: Scalar>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = src[i * cols + j];
        }
    }
    out
}

/// `c[i][j] = Σ_k a[i][k]·b[k][j]`, each output accumulated with `k`
/// ascending.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::shape(format!(
            "matmul inner extents differ: {:?} x {:?}",
            a.shape, b.shape
        )));
    }
    let mut out = vec![T::zero(); m * n];
    matmul_into(&a.data, &b.data, &mut out, m, k, n);
    Tensor::from_vec(&[m, n], out)
}

/// Accumulating kernel: `c += a·b` on raw row-major slices.
///
/// The i-k-j loop order keeps the innermost loop contiguous while each
/// `c[i][j]` still sees its terms in ascending `k`.
pub(crate) fn matmul_into<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &aip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += aip * bv;
            }
        }
    }
}

#[inline]
fn out_extent(input: usize, kernel: usize, stride: usize) -> usize {
    (input - kernel) / stride + 1
}

fn check_window(s: Shape4, kh: usize, kw: usize, stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::shape("stride must be at least 1"));
    }
    if kh == 0 || kw == 0 {
        return Err(Error::shape("kernel extents must be at least 1"));
    }
    if kh > s.h || kw > s.w {
        return Err(Error::shape(format!(
            "kernel {kh}x{kw} larger than input {}x{}",
            s.h, s.w
        )));
    }
    Ok(())
}

/// Patch matrix of a batch of images.
///
/// The result has shape `[c·kh·kw, n·oh·ow]` with valid padding. Row
/// `(ch·kh + u)·kw + v` holds kernel tap `(ch, u, v)`; column `(b·oh + i)·ow + j`
/// is the receptive field of output position `(i, j)` of sample `b`.
pub fn im2col<T: Scalar>(x: &Tensor<T>, kh: usize, kw: usize, stride: usize) -> Result<Tensor<T>> {
    let s = x.shape4()?;
    check_window(s, kh, kw, stride)?;
    let oh = out_extent(s.h, kh, stride);
    let ow = out_extent(s.w, kw, stride);
    let per_sample = oh * ow;
    let cols = s.n * per_sample;
    let mut out = vec![T::zero(); s.c * kh * kw * cols];
    for b in 0..s.n {
        let sample = &x.data[b * s.sample_len()..(b + 1) * s.sample_len()];
        gather_patches(sample, s, kh, kw, stride, &mut out, cols, b * per_sample);
    }
    Tensor::from_vec(&[s.c * kh * kw, cols], out)
}

/// Writes the patch columns of one `[c, h, w]` sample into `out`, a row-major
/// matrix with `total_cols` columns, starting at column `col_offset`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gather_patches<T: Scalar>(
    sample: &[T],
    s: Shape4,
    kh: usize,
    kw: usize,
    stride: usize,
    out: &mut [T],
    total_cols: usize,
    col_offset: usize,
) {
    let oh = out_extent(s.h, kh, stride);
    let ow = out_extent(s.w, kw, stride);
    for ch in 0..s.c {
        let plane = &sample[ch * s.h * s.w..(ch + 1) * s.h * s.w];
        for u in 0..kh {
            for v in 0..kw {
                let row = (ch * kh + u) * kw + v;
                let dst = &mut out[row * total_cols + col_offset..row * total_cols + col_offset + oh * ow];
                for i in 0..oh {
                    let src_row = &plane[(i * stride + u) * s.w..];
                    let dst_row = &mut dst[i * ow..(i + 1) * ow];
                    if stride == 1 {
                        dst_row.copy_from_slice(&src_row[v..v + ow]);
                    } else {
                        for (j, d) in dst_row.iter_mut().enumerate() {
                            *d = src_row[j * stride + v];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`gather_patches`] for stride 1: accumulates patch columns back
/// onto a `[c, h, w]` sample.
pub(crate) fn scatter_patches<T: Scalar>(
    cols: &[T],
    s: Shape4,
    kh: usize,
    kw: usize,
    sample: &mut [T],
) {
    let oh = s.h - kh + 1;
    let ow = s.w - kw + 1;
    let total_cols = oh * ow;
    for ch in 0..s.c {
        let plane = &mut sample[ch * s.h * s.w..(ch + 1) * s.h * s.w];
        for u in 0..kh {
            for v in 0..kw {
                let row = (ch * kh + u) * kw + v;
                let src = &cols[row * total_cols..(row + 1) * total_cols];
                for i in 0..oh {
                    let dst_row = &mut plane[(i + u) * s.w + v..(i + u) * s.w + v + ow];
                    for (d, &g) in dst_row.iter_mut().zip(&src[i * ow..(i + 1) * ow]) {
                        *d += g;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_fills_every_element() {
        let t = Tensor::<f32>::new(&[2, 2], 0.0).unwrap();
        assert_eq!(t.data(), &[0.0; 4]);
        let ones = Tensor::<f32>::new(&[1, 1, 64, 64], 1.0).unwrap();
        assert_eq!(ones.len(), 4096);
        assert!(ones.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(matches!(
            Tensor::<f32>::new(&[3, 0], 0.0),
            Err(Error::InvalidShape(_))
        ));
        assert!(Tensor::<f32>::new(&[], 0.0).is_err());
        assert!(Tensor::<f32>::new(&[1, 1, 1, 1, 1], 0.0).is_err());
    }

    #[test]
    fn indexing_is_row_major_and_checked() {
        let t = Tensor::<f64>::from_vec(&[2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.get(&[1, 0]).unwrap(), 3.0);
        assert_eq!(t.get(&[0, 2]).unwrap(), 2.0);
        assert!(t.get(&[2, 0]).is_err());
        assert!(t.get(&[0]).is_err());
    }

    #[test]
    fn matmul_identity_and_example() {
        let id = Tensor::<f32>::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::<f32>::from_vec(&[2, 3], vec![1.5, -2.0, 3.0, 4.0, 5.0, -6.0]).unwrap();
        assert_eq!(matmul(&id, &b).unwrap(), b);

        let a = Tensor::<f32>::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::<f32>::from_vec(&[2, 1], vec![5.0, 6.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_mismatch() {
        let a = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        let b = Tensor::<f32>::zeros(&[4, 5]).unwrap();
        assert!(matches!(matmul(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn im2col_paper_input() {
        let x = Tensor::<f32>::zeros(&[1, 1, 64, 64]).unwrap();
        assert_eq!(im2col(&x, 3, 3, 1).unwrap().shape(), &[9, 3844]);
    }

    #[test]
    fn im2col_single_window_is_flattened_input() {
        let x = Tensor::<f32>::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let cols = im2col(&x, 2, 2, 1).unwrap();
        assert_eq!(cols.shape(), &[4, 1]);
        assert_eq!(cols.data(), x.data());
    }

    #[test]
    fn im2col_kernel_too_large() {
        let x = Tensor::<f32>::zeros(&[1, 1, 2, 2]).unwrap();
        assert!(im2col(&x, 3, 2, 1).is_err());
    }

    #[test]
    fn transpose_round_trips() {
        let t = Tensor::<f32>::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let tt = t.transpose().unwrap();
        assert_eq!(tt.shape(), &[3, 2]);
        assert_eq!(tt.data(), &[1., 4., 2., 5., 3., 6.]);
        assert_eq!(tt.transpose().unwrap(), t);
    }
}
