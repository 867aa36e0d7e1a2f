use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::Sample;

/// One mini-batch: images `[b, c, h, w]`, one-hot targets `[b, classes]` and
/// the raw labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub pixels: Tensor<f32>,
    pub onehot: Tensor<f32>,
    pub labels: Vec<usize>,
}

/// Iterator over mini-batches of a sample list. The last batch may be short.
pub struct Batches<'a> {
    samples: &'a [Sample],
    order: Vec<usize>,
    batch_size: usize,
    classes: usize,
    pos: usize,
}

/// Mini-batches of `samples`, in stored order or in an order drawn from
/// `shuffle`.
pub fn batches<'a>(
    samples: &'a [Sample],
    batch_size: usize,
    classes: usize,
    shuffle: Option<&mut Rng>,
) -> Result<Batches<'a>> {
    if samples.is_empty() {
        return Err(Error::Data("cannot batch an empty sample list".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let shape = samples[0].pixels.shape();
    for s in samples {
        if s.pixels.shape() != shape {
            return Err(Error::Data(format!(
                "sample {} has shape {:?}, expected {shape:?}",
                s.id,
                s.pixels.shape()
            )));
        }
        if s.label >= classes {
            return Err(Error::Label(format!("sample {} has label {} of {classes}", s.id, s.label)));
        }
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    if let Some(rng) = shuffle {
        rng.shuffle(&mut order);
    }
    Ok(Batches {
        samples,
        order,
        batch_size,
        classes,
        pos: 0,
    })
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx = &self.order[self.pos..end];
        self.pos = end;

        let b = idx.len();
        let sample_shape = self.samples[0].pixels.shape();
        let mut pixels = Vec::with_capacity(b * self.samples[0].pixels.len());
        let mut onehot = vec![0.0; b * self.classes];
        let mut labels = Vec::with_capacity(b);
        for (row, &i) in idx.iter().enumerate() {
            let s = &self.samples[i];
            pixels.extend_from_slice(s.pixels.data());
            onehot[row * self.classes + s.label] = 1.0;
            labels.push(s.label);
        }
        let mut shape = vec![b];
        shape.extend_from_slice(sample_shape);
        Some(Batch {
            pixels: Tensor::from_vec(&shape, pixels).expect("validated sample shapes"),
            onehot: Tensor::from_vec(&[b, self.classes], onehot).expect("validated labels"),
            labels,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.pos).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for Batches<'_> {}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| Sample {
                id: format!("s{i:03}"),
                pixels: Tensor::new(&[1, 2, 2], i as f32).unwrap(),
                label: i % 4,
            })
            .collect()
    }

    #[test]
    fn full_batches() {
        let s = samples(676);
        let mut it = batches(&s, 13, 4, None).unwrap();
        assert_eq!(it.len(), 52);
        assert!(it.all(|b| b.labels.len() == 13));
    }

    #[test]
    fn short_batch_kept() {
        let s = samples(5);
        let all: Vec<Batch> = batches(&s, 13, 4, None).unwrap().collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].pixels.shape(), &[5, 1, 2, 2]);
        for row in all[0].onehot.data().chunks(4) {
            assert_eq!(row.iter().sum::<f32>(), 1.0);
        }
    }

    #[test]
    fn fixed_order_repeats() {
        let s = samples(30);
        let a: Vec<Vec<usize>> = batches(&s, 7, 4, None).unwrap().map(|b| b.labels).collect();
        let b: Vec<Vec<usize>> = batches(&s, 7, 4, None).unwrap().map(|b| b.labels).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn shuffled_order_follows_seed() {
        let s = samples(30);
        let draw = |seed| -> Vec<f32> {
            let mut rng = Rng::new(seed);
            batches(&s, 7, 4, Some(&mut rng))
                .unwrap()
                .flat_map(|b| b.pixels.into_vec())
                .collect()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn empty_is_error() {
        assert!(batches(&[], 13, 4, None).is_err());
    }
}
