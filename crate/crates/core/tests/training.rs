use lungcnn::data::synthetic::quadrant_samples;
use lungcnn::data::{split_holdout, DatasetSplit, Sample, SplitRatios};
use lungcnn::layers::{ConvStage, ModelSpec};
use lungcnn::metrics::MetricConventions;
use lungcnn::rng::Rng;
use lungcnn::train::{evaluate, fit, glorot_limit, init_params, train_epoch, AdamState, TrainConfig};

fn small_spec() -> ModelSpec {
    ModelSpec {
        input_size: 16,
        in_channels: 1,
        conv: vec![ConvStage { filters: 4, kernel: 3 }],
        hidden: 16,
        classes: 4,
    }
}

fn small_split(n: usize, seed: u64) -> DatasetSplit<Sample> {
    split_holdout(quadrant_samples(n, 16, seed), SplitRatios::default(), 1000).unwrap()
}

#[test]
fn glorot_init_statistics() {
    let spec = ModelSpec::default();
    let params = init_params::<f32>(&spec, &mut Rng::new(1000)).unwrap();
    let names = params.names();
    for (name, t) in names.iter().zip(params.tensors()) {
        if name.ends_with(".bias") {
            assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            continue;
        }
        let (fan_in, fan_out) = match t.shape() {
            [f, c, kh, kw] => (c * kh * kw, f * kh * kw),
            [i, o] => (*i, *o),
            s => panic!("{name}: {s:?}"),
        };
        let limit = glorot_limit(fan_in, fan_out) as f32;
        assert!(t.data().iter().all(|v| v.abs() <= limit), "{name}");
    }
    // dense1 weights: far more than 10^4 draws; mean of U(-l, l) is 0 with
    // standard error l / sqrt(3n)
    let dense = params.tensors()[6];
    let n = dense.len() as f64;
    let limit = glorot_limit(1600, 260);
    let mean: f64 = dense.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    assert!(mean.abs() < 4.0 * limit / (3.0 * n).sqrt(), "mean {mean}");
    let var: f64 = dense.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    assert!((var - limit * limit / 3.0).abs() < 0.02 * limit * limit / 3.0, "var {var}");
}

#[test]
fn fit_is_bitwise_deterministic() {
    let split = small_split(40, 1);
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let a = fit(&small_spec(), &split, &cfg, MetricConventions::default()).unwrap();
    let b = fit(&small_spec(), &split, &cfg, MetricConventions::default()).unwrap();
    let strip = |logs: &[lungcnn::train::EpochLog]| -> Vec<String> {
        logs.iter().map(|l| format!("{:?} {:?}", l.train, l.validation)).collect()
    };
    assert_eq!(strip(&a.logs), strip(&b.logs));
    for (x, y) in a.params.tensors().iter().zip(b.params.tensors()) {
        let bits = |t: &lungcnn::tensor::Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(x), bits(y));
    }
    assert_eq!(a.best_epoch, b.best_epoch);
}

#[test]
fn small_model_learns_quadrants() {
    let split = small_split(200, 2);
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let out = fit(&small_spec(), &split, &cfg, MetricConventions::default()).unwrap();
    let first = out.logs.first().unwrap().train.loss;
    let last = out.logs.last().unwrap().train.loss;
    assert!(last < first, "loss {first} -> {last}");
    let test = evaluate(&out.params, &split.test, MetricConventions::default()).unwrap();
    assert!(test.summary.accuracy >= 0.9, "test accuracy {}", test.summary.accuracy);
}

#[test]
fn small_model_memorizes_one_batch() {
    let mut samples = quadrant_samples(13, 16, 3);
    let mut rng = Rng::new(9);
    for s in &mut samples {
        s.label = rng.below(4) as usize;
    }
    let spec = small_spec();
    let cfg = TrainConfig::default();
    let mut params = init_params(&spec, &mut Rng::new(cfg.seed)).unwrap();
    let mut state = AdamState::for_model(&params);
    let mut shuffle = Rng::new(cfg.seed);
    let mut loss = f64::INFINITY;
    for _ in 0..200 {
        train_epoch(&mut params, &mut state, &samples, &cfg, &mut shuffle).unwrap();
        loss = evaluate(&params, &samples, MetricConventions::default()).unwrap().summary.loss;
        if loss < 0.01 {
            break;
        }
    }
    assert!(loss < 0.01, "loss {loss}");
}

#[test]
fn best_epoch_has_highest_validation_accuracy() {
    let split = small_split(60, 4);
    let cfg = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let out = fit(&small_spec(), &split, &cfg, MetricConventions::default()).unwrap();
    let best = out.logs.iter().map(|l| l.validation.accuracy).fold(0.0, f64::max);
    assert_eq!(out.logs[out.best_epoch - 1].validation.accuracy, best);
    let again = evaluate(&out.best, &split.validation, MetricConventions::default()).unwrap();
    assert_eq!(again.summary, out.logs[out.best_epoch - 1].validation);
}
