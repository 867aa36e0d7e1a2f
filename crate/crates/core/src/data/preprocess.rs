//! Image preparation: grayscale → denoise → segment → morphology → resize →
//! normalize, always in that order.
//!
//! Denoising is a 3x3 median filter. Segmentation computes a global Otsu
//! threshold on luminance and multiplies the image by the resulting
//! foreground mask. Morphology is a 3x3 opening followed by a closing; it is
//! applied to the segmentation mask when segmentation is on and to the image
//! itself (as min/max filtering) otherwise. All neighborhood filters
//! replicate edge pixels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Luminance weights for R, G, B.
pub const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessOptions {
    /// Output side length; resizing is always on.
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default = "yes")]
    pub grayscale: bool,
    #[serde(default)]
    pub denoise: bool,
    #[serde(default)]
    pub segment: bool,
    #[serde(default)]
    pub morphology: bool,
}

fn default_size() -> usize {
    64
}

fn yes() -> bool {
    true
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            size: default_size(),
            grayscale: true,
            denoise: false,
            segment: false,
            morphology: false,
        }
    }
}

impl PreprocessOptions {
    /// Channels produced: 1 in grayscale mode, otherwise 3.
    pub fn channels(&self) -> usize {
        if self.grayscale {
            1
        } else {
            3
        }
    }
}

/// A stack of `h x w` planes.
struct Planes {
    h: usize,
    w: usize,
    planes: Vec<Vec<f32>>,
}

impl Planes {
    fn from_tensor(img: &Tensor<f32>) -> Result<Self> {
        let &[c, h, w] = img.shape() else {
            return Err(Error::shape(format!("expected a [c, h, w] image, got {:?}", img.shape())));
        };
        if c != 1 && c != 3 {
            return Err(Error::shape(format!("images must have 1 or 3 channels, got {c}")));
        }
        let planes = img.data().chunks(h * w).map(|p| p.to_vec()).collect();
        Ok(Planes { h, w, planes })
    }

    fn into_tensor(self) -> Result<Tensor<f32>> {
        let c = self.planes.len();
        Tensor::from_vec(&[c, self.h, self.w], self.planes.concat())
    }

    fn luminance(&self) -> Vec<f32> {
        if self.planes.len() == 1 {
            return self.planes[0].clone();
        }
        (0..self.h * self.w)
            .map(|i| (0..3).map(|c| LUMA[c] * self.planes[c][i]).sum())
            .collect()
    }
}

fn neighborhood(plane: &[f32], h: usize, w: usize, i: usize, j: usize) -> [f32; 9] {
    let mut out = [0.0; 9];
    let mut n = 0;
    for di in [-1isize, 0, 1] {
        for dj in [-1isize, 0, 1] {
            let r = (i as isize + di).clamp(0, h as isize - 1) as usize;
            let c = (j as isize + dj).clamp(0, w as isize - 1) as usize;
            out[n] = plane[r * w + c];
            n += 1;
        }
    }
    out
}

fn filter3(plane: &[f32], h: usize, w: usize, pick: impl Fn(&mut [f32; 9]) -> f32) -> Vec<f32> {
    let mut out = Vec::with_capacity(plane.len());
    for i in 0..h {
        for j in 0..w {
            let mut nb = neighborhood(plane, h, w, i, j);
            out.push(pick(&mut nb));
        }
    }
    out
}

pub fn median3(plane: &[f32], h: usize, w: usize) -> Vec<f32> {
    filter3(plane, h, w, |nb| {
        nb.sort_by(f32::total_cmp);
        nb[4]
    })
}

fn erode(plane: &[f32], h: usize, w: usize) -> Vec<f32> {
    filter3(plane, h, w, |nb| nb.iter().copied().fold(f32::INFINITY, f32::min))
}

fn dilate(plane: &[f32], h: usize, w: usize) -> Vec<f32> {
    filter3(plane, h, w, |nb| nb.iter().copied().fold(f32::NEG_INFINITY, f32::max))
}

/// 3x3 opening followed by closing.
pub fn open_close(plane: &[f32], h: usize, w: usize) -> Vec<f32> {
    let opened = dilate(&erode(plane, h, w), h, w);
    erode(&dilate(&opened, h, w), h, w)
}

/// Otsu threshold over a 256-bin histogram of `values` in `[0, 1]`.
///
/// Returns the bin index `t` maximizing between-class variance, with the
/// foreground being bins `> t`; `None` when fewer than two bins are occupied.
pub fn otsu_threshold(values: &[f32]) -> Option<usize> {
    let mut hist = [0u64; 256];
    for &v in values {
        hist[(v.clamp(0.0, 1.0) * 255.0).round() as usize] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_var) = (0, -1.0);
    for (t, &count) in hist.iter().enumerate().take(255) {
        w0 += count as f64;
        sum0 += t as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best = t;
        }
    }
    Some(best)
}

/// Bilinear resize with half-pixel-centered sampling and edge clamping.
pub fn resize_bilinear(plane: &[f32], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    if h == out_h && w == out_w {
        return plane.to_vec();
    }
    let axis = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f32) {
        let scale = src_len as f64 / dst_len as f64;
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, (pos - lo as f64) as f32)
    };
    let cols: Vec<_> = (0..out_w).map(|j| axis(j, w, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let (r0, r1, fy) = axis(i, h, out_h);
        for &(c0, c1, fx) in &cols {
            let top = plane[r0 * w + c0] * (1.0 - fx) + plane[r0 * w + c1] * fx;
            let bottom = plane[r1 * w + c0] * (1.0 - fx) + plane[r1 * w + c1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

pub fn preprocess(img: &Tensor<f32>, opts: &PreprocessOptions) -> Result<Tensor<f32>> {
    if opts.size == 0 {
        return Err(Error::Config("preprocess size must be positive".into()));
    }
    let mut p = Planes::from_tensor(img)?;
    let (h, w) = (p.h, p.w);

    if opts.grayscale && p.planes.len() == 3 {
        p.planes = vec![p.luminance()];
    }
    if opts.denoise {
        for plane in &mut p.planes {
            *plane = median3(plane, h, w);
        }
    }
    if opts.segment {
        let lum = p.luminance();
        if let Some(t) = otsu_threshold(&lum) {
            let cut = t as f32 / 255.0;
            let mut mask: Vec<f32> = lum.iter().map(|&v| if v > cut { 1.0 } else { 0.0 }).collect();
            if opts.morphology {
                mask = open_close(&mask, h, w);
            }
            for plane in &mut p.planes {
                for (v, m) in plane.iter_mut().zip(&mask) {
                    *v *= m;
                }
            }
        }
    } else if opts.morphology {
        for plane in &mut p.planes {
            *plane = open_close(plane, h, w);
        }
    }
    for plane in &mut p.planes {
        *plane = resize_bilinear(plane, h, w, opts.size, opts.size);
        for v in plane.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
    p.h = opts.size;
    p.w = opts.size;
    if !opts.grayscale && p.planes.len() == 1 {
        p.planes = vec![p.planes[0].clone(); 3];
    }
    p.into_tensor()
}
