use std::path::Path;

use image::{ColorType, DynamicImage};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Decodes a PNG or JPEG stream to `[c, h, w]` in `[0, 1]`.
///
/// Grayscale sources (with or without alpha) give one channel; everything
/// else gives three in R, G, B order. Alpha is dropped and samples are
/// scaled by 1/255.
pub fn decode_image(bytes: &[u8], path: &Path) -> Result<Tensor<f32>> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    to_tensor(img)
}

pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes, path)
}

fn to_tensor(img: DynamicImage) -> Result<Tensor<f32>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let scale = |v: u8| v as f32 / 255.0;
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16 => {
            let data = img.to_luma8().into_raw().into_iter().map(scale).collect();
            Tensor::from_vec(&[1, h, w], data)
        }
        _ => {
            let rgb = img.to_rgb8();
            let mut data = vec![0.0; 3 * h * w];
            for (i, px) in rgb.pixels().enumerate() {
                for c in 0..3 {
                    data[c * h * w + i] = scale(px[c]);
                }
            }
            Tensor::from_vec(&[3, h, w], data)
        }
    }
}
