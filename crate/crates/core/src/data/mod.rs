//! Dataset ingestion: directory scan, decoding, preprocessing, hold-out split
//! and batching.

mod batch;
mod decode;
mod preprocess;
mod scan;
mod split;
pub mod synthetic;

use std::path::Path;

use rayon::prelude::*;

pub use batch::{batches, Batch, Batches};
pub use decode::{decode_image, load_image};
pub use preprocess::{median3, open_close, otsu_threshold, preprocess, resize_bilinear, PreprocessOptions, LUMA};
pub use scan::{scan_dataset, ClassDir, ClassMapping, ScannedImage};
pub use split::{split_holdout, DatasetSplit, SplitRatios};

use crate::error::Result;
use crate::tensor::Tensor;

/// A preprocessed image and its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Relative path of the source file.
    pub id: String,
    /// `[c, size, size]` in `[0, 1]`.
    pub pixels: Tensor<f32>,
    pub label: usize,
}

/// Decodes and preprocesses scanned images. Work may run in parallel; the
/// output order is the input order.
pub fn load_samples(images: &[ScannedImage], opts: &PreprocessOptions) -> Result<Vec<Sample>> {
    images
        .par_iter()
        .map(|img| {
            let raw = load_image(&img.path)?;
            Ok(Sample {
                id: img.id.clone(),
                pixels: preprocess(&raw, opts)?,
                label: img.label,
            })
        })
        .collect()
}

/// Scan, split, then decode: the partition depends only on the scan order and
/// the seed.
pub fn load_split(
    root: &Path,
    mapping: &ClassMapping,
    opts: &PreprocessOptions,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplit<Sample>> {
    let scanned = scan_dataset(root, mapping)?;
    let split = split_holdout(scanned, ratios, seed)?;
    Ok(DatasetSplit {
        train: load_samples(&split.train, opts)?,
        validation: load_samples(&split.validation, opts)?,
        test: load_samples(&split.test, opts)?,
        seed: split.seed,
        ratios: split.ratios,
    })
}
