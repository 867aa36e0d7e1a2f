use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config(format!("split ratios {parts:?} must lie in [0, 1]")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// `(train, validation, test)` counts for `n` items: the first two are
    /// floored, test takes the remainder.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        // The nudge keeps exact products like 100 × 0.7 from flooring down.
        let floor = |r: f64| ((n as f64 * r) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let validation = floor(self.validation).min(n - train);
        (train, validation, n - train - validation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

impl<T> DatasetSplit<T> {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> Result<U>) -> Result<DatasetSplit<U>> {
        let mut conv = |v: Vec<T>| v.into_iter().map(&mut f).collect::<Result<Vec<U>>>();
        Ok(DatasetSplit {
            train: conv(self.train)?,
            validation: conv(self.validation)?,
            test: conv(self.test)?,
            seed: self.seed,
            ratios: self.ratios,
        })
    }
}

/// Seeded hold-out partition of `items`, which should already be in a
/// deterministic order.
pub fn split_holdout<T>(items: Vec<T>, ratios: SplitRatios, seed: u64) -> Result<DatasetSplit<T>> {
    ratios.validate()?;
    if items.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let (n_train, n_val, _) = ratios.counts(items.len());
    let mut order: Vec<usize> = (0..items.len()).collect();
    Rng::for_stream(seed, Stream::Split).shuffle(&mut order);

    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<T> { idx.iter().map(|&i| slots[i].take().expect("index used once")).collect() };
    let train = take(&order[..n_train]);
    let validation = take(&order[n_train..n_train + n_val]);
    let test = take(&order[n_train + n_val..]);
    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed,
        ratios,
    })
}
