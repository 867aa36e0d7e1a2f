use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{batches, DatasetSplit, Sample};
use crate::error::{Error, Result};
use crate::layers::{model_backward, model_forward, ModelParams, ModelSpec, Upstream};
use crate::metrics::{EvalBatch, MetricConventions, MetricSummary, MetricsReport};
use crate::rng::{Rng, Stream};
use crate::tensor::Tensor;

use super::{adam_step, categorical_cross_entropy, init_params, AdamState, TrainConfig};

/// Samples per forward pass when evaluating. Per-sample outputs do not depend
/// on how samples are grouped.
pub const EVAL_BATCH: usize = 32;

/// Metrics of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train: MetricSummary,
    pub validation: MetricSummary,
    /// Present only when the caller evaluated the test split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<MetricSummary>,
    /// Wall-clock seconds; excluded from serialized logs.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Result of one pass over the training split.
#[derive(Debug, Clone)]
pub struct EpochOutcome {
    /// Probabilities seen during the pass (before each batch's update) and
    /// the matching labels, in visit order.
    pub seen: EvalBatch,
    pub batches: usize,
}

fn classes(params: &ModelParams<f32>) -> usize {
    params.spec.classes
}

fn check_samples(params: &ModelParams<f32>, samples: &[Sample], what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Data(format!("{what} split is empty")));
    }
    let spec = &params.spec;
    let want = [spec.in_channels, spec.input_size, spec.input_size];
    if let Some(bad) = samples.iter().find(|s| s.pixels.shape() != want) {
        return Err(Error::Data(format!(
            "sample {} has shape {:?}, model expects {want:?}",
            bad.id,
            bad.pixels.shape()
        )));
    }
    Ok(())
}

/// One epoch: mini-batches in `rng` order (or stored order when shuffling is
/// off), one Adam step per batch on the mean-loss gradient.
pub fn train_epoch(
    params: &mut ModelParams<f32>,
    state: &mut AdamState<f32>,
    train: &[Sample],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<EpochOutcome> {
    check_samples(params, train, "training")?;
    let k = classes(params);
    let shuffle = if cfg.shuffle_each_epoch { Some(rng) } else { None };
    let mut probs = Vec::with_capacity(train.len() * k);
    let mut labels = Vec::with_capacity(train.len());
    let mut count = 0;
    for batch in batches(train, cfg.batch_size, k, shuffle)? {
        let (p, cache) = model_forward(params, &batch.pixels)?;
        let (_, dlogits) = categorical_cross_entropy(&p, &batch.onehot)?;
        let grads = model_backward(params, &cache, Upstream::Logits(&dlogits))?;
        adam_step(params, &grads, state, cfg)?;
        probs.extend(p.data().iter().map(|&v| v as f64));
        labels.extend(batch.labels);
        count += 1;
    }
    Ok(EpochOutcome {
        seen: EvalBatch::from_rows(probs, k, labels)?,
        batches: count,
    })
}

/// Class probabilities for `samples`, in order.
pub fn predict(params: &ModelParams<f32>, samples: &[Sample]) -> Result<EvalBatch> {
    check_samples(params, samples, "evaluation")?;
    let k = classes(params);
    let mut probs = Vec::with_capacity(samples.len() * k);
    let mut labels = Vec::with_capacity(samples.len());
    for batch in batches(samples, EVAL_BATCH, k, None)? {
        let (p, _) = model_forward(params, &batch.pixels)?;
        probs.extend(p.data().iter().map(|&v| v as f64));
        labels.extend(batch.labels);
    }
    EvalBatch::from_rows(probs, k, labels)
}

pub fn evaluate(params: &ModelParams<f32>, samples: &[Sample], conventions: MetricConventions) -> Result<MetricsReport> {
    MetricsReport::compute(&predict(params, samples)?, conventions)
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: ModelParams<f32>,
    pub logs: Vec<EpochLog>,
    /// Parameters after the epoch with the best validation accuracy (ties:
    /// lower validation loss, then earlier epoch).
    pub best: ModelParams<f32>,
    pub best_epoch: usize,
}

pub fn fit(spec: &ModelSpec, splits: &DatasetSplit<Sample>, cfg: &TrainConfig, conventions: MetricConventions) -> Result<FitOutcome> {
    fit_with(spec, splits, cfg, conventions, |_| {})
}

/// [`fit`], calling `on_epoch` after every epoch.
pub fn fit_with(
    spec: &ModelSpec,
    splits: &DatasetSplit<Sample>,
    cfg: &TrainConfig,
    conventions: MetricConventions,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<FitOutcome> {
    cfg.validate()?;
    let mut params: ModelParams<f32> = init_params(spec, &mut Rng::for_stream(cfg.seed, Stream::Init))?;
    check_samples(&params, &splits.train, "training")?;
    check_samples(&params, &splits.validation, "validation")?;
    let mut state = AdamState::for_model(&params);
    let mut shuffle = Rng::for_stream(cfg.seed, Stream::Shuffle);

    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best = params.clone();
    let mut best_key: Option<(f64, f64)> = None;
    let mut best_epoch = 0;
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let outcome = train_epoch(&mut params, &mut state, &splits.train, cfg, &mut shuffle)?;
        let train = MetricsReport::compute(&outcome.seen, conventions)?.summary;
        if !train.loss.is_finite() || !params.tensors().iter().all(|t| t.is_finite()) {
            return Err(Error::NumericInput("training (parameters diverged)"));
        }
        let validation = evaluate(&params, &splits.validation, conventions)?.summary;
        let log = EpochLog {
            epoch,
            train,
            validation,
            test: None,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        let key = (validation.accuracy, -validation.loss);
        if best_key.is_none_or(|b| key > b) {
            best_key = Some(key);
            best = params.clone();
            best_epoch = epoch;
        }
        on_epoch(&log);
        logs.push(log);
    }
    Ok(FitOutcome {
        params,
        logs,
        best,
        best_epoch,
    })
}

/// Stacks sample images into one `[n, c, h, w]` tensor.
pub fn stack(samples: &[Sample]) -> Result<Tensor<f32>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Data("nothing to stack".into()))?;
    let mut shape = vec![samples.len()];
    shape.extend_from_slice(first.pixels.shape());
    Tensor::from_vec(
        &shape,
        samples.iter().flat_map(|s| s.pixels.data().iter().copied()).collect(),
    )
}
