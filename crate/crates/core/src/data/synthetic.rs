//! Quadrant-brightness images: class `k` lights up quadrant `k` (row-major:
//! top-left, top-right, bottom-left, bottom-right) on top of uniform noise.
//! Every pixel in the lit quadrant exceeds every pixel elsewhere, so the four
//! classes are separable by comparing quadrant means.

use std::path::Path;

use image::GrayImage;

use crate::error::{Error, Result};
use crate::rng::{Rng, Stream};
use crate::tensor::Tensor;

use super::{ClassMapping, Sample};

pub const NOISE: f64 = 0.35;
pub const LIFT: f64 = 0.5;

pub fn quadrant_of(label: usize, size: usize, i: usize, j: usize) -> bool {
    let half = size / 2;
    let (top, left) = (label / 2 == 0, label.is_multiple_of(2));
    (i < half) == top && (j < half) == left
}

fn quadrant_pixels(label: usize, size: usize, rng: &mut Rng) -> Vec<f32> {
    let mut px = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let lift = if quadrant_of(label, size, i, j) { LIFT } else { 0.0 };
            px.push((rng.uniform(0.0, NOISE) + lift) as f32);
        }
    }
    px
}

/// `n` single-channel samples with labels cycling 0, 1, 2, 3.
pub fn quadrant_samples(n: usize, size: usize, seed: u64) -> Vec<Sample> {
    let mut rng = Rng::for_stream(seed, Stream::Synthetic);
    (0..n)
        .map(|i| {
            let label = i % 4;
            Sample {
                id: format!("synthetic/{i:05}"),
                pixels: Tensor::from_vec(&[1, size, size], quadrant_pixels(label, size, &mut rng))
                    .expect("positive size"),
                label,
            }
        })
        .collect()
}

/// Writes `per_class` quadrant PNGs for each of the four default class
/// directories under `root`.
pub fn write_quadrant_tree(root: &Path, per_class: usize, size: usize, seed: u64) -> Result<()> {
    let mapping = ClassMapping::default();
    let mut rng = Rng::for_stream(seed, Stream::Synthetic);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    for class in &mapping.classes {
        let dir = root.join(&class.prefix);
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        for k in 0..per_class {
            let px = quadrant_pixels(class.label, size, &mut rng);
            let bytes = px.iter().map(|&v| (v * 255.0).round() as u8).collect();
            let img = GrayImage::from_raw(size as u32, size as u32, bytes).expect("square buffer");
            let path = dir.join(format!("{k:04}.png"));
            img.save(&path).map_err(|e| Error::Decode {
                path: path.clone(),
                reason: e.to_string(),
            })?;
        }
    }
    Ok(())
}
