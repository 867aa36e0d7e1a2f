//! Finite-difference gradient checks shared by the integration and acceptance
//! suites.
//!
//! Analytic gradients are computed at precision `P` (f32 or f64). The
//! reference is always a central difference of the f64 forward pass, so the
//! f32 checks measure the f32 backward pass itself rather than f32 rounding
//! in the difference quotient.

#![allow(dead_code)]

use lungcnn::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward,
    model_backward, model_forward, relu, relu_backward, softmax, softmax_backward, ConvLayer, ConvStage,
    DenseLayer, ModelParams, ModelSpec, Upstream,
};
use lungcnn::rng::Rng;
use lungcnn::tensor::{Scalar, Tensor};
use lungcnn::train::categorical_cross_entropy;
use lungcnn_oracles::{central_difference, relative_error};

pub const STEP: f64 = 1e-5;
pub const TOL_F32: f64 = 1e-3;
pub const TOL_F64: f64 = 1e-6;
/// Magnitude below which errors are measured absolutely rather than
/// relatively.
pub const FLOOR_F32: f64 = 1e-4;
pub const FLOOR_F64: f64 = 1e-8;

pub trait Precision: Scalar {
    const TOL: f64;
    const FLOOR: f64;
    const NAME: &'static str;
}

impl Precision for f32 {
    const TOL: f64 = TOL_F32;
    const FLOOR: f64 = FLOOR_F32;
    const NAME: &'static str = "f32";
}

impl Precision for f64 {
    const TOL: f64 = TOL_F64;
    const FLOOR: f64 = FLOOR_F64;
    const NAME: &'static str = "f64";
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GradReport {
    pub cases: usize,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel: f64,
}

impl GradReport {
    pub fn merge(&mut self, other: GradReport) {
        self.cases += other.cases;
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.max_rel = self.max_rel.max(other.max_rel);
    }

    fn compare(&mut self, analytic: f64, numeric: f64, floor: f64) {
        self.checked += 1;
        self.max_rel = self.max_rel.max(relative_error(analytic, numeric, floor));
    }
}

pub fn random_tensor(rng: &mut Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-scale, scale)).collect()).unwrap()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn with_value(t: &Tensor<f64>, data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(t.shape(), data.to_vec()).unwrap()
}

fn compare_all(
    report: &mut GradReport,
    analytic: &Tensor<f64>,
    point: &Tensor<f64>,
    floor: f64,
    mut loss: impl FnMut(&Tensor<f64>) -> f64,
) {
    for i in 0..point.len() {
        let numeric = central_difference(|v| loss(&with_value(point, v)), point.data(), i, STEP);
        report.compare(analytic.data()[i], numeric, floor);
    }
}

/// Random conv layer: `L = Σ r·conv(x)`; checks dx, dweights, dbias.
pub fn conv_case<P: Precision>(rng: &mut Rng, dims: (usize, usize, usize, usize), filters: usize, kernel: usize) -> GradReport {
    let (n, c, h, w) = dims;
    let x = random_tensor(rng, &[n, c, h, w], 1.0);
    let wt = random_tensor(rng, &[filters, c, kernel, kernel], 1.0);
    let b = random_tensor(rng, &[filters], 0.5);
    let (oh, ow) = (h - kernel + 1, w - kernel + 1);
    let r = random_tensor(rng, &[n, filters, oh, ow], 1.0);

    let layer = ConvLayer::new(wt.cast::<P>(), b.cast::<P>()).unwrap();
    let (_, cache) = conv2d_forward(&x.cast::<P>(), &layer).unwrap();
    let g = conv2d_backward(&r.cast::<P>(), &cache, &layer).unwrap();

    let f = |x: &Tensor<f64>, wt: &Tensor<f64>, b: &Tensor<f64>| {
        let l = ConvLayer::new(wt.clone(), b.clone()).unwrap();
        dot(&conv2d_forward(x, &l).unwrap().0, &r)
    };
    let mut rep = GradReport {
        cases: 1,
        ..Default::default()
    };
    compare_all(&mut rep, &g.dx.cast(), &x, P::FLOOR, |v| f(v, &wt, &b));
    compare_all(&mut rep, &g.dweights.cast(), &wt, P::FLOOR, |v| f(&x, v, &b));
    compare_all(&mut rep, &g.dbias.cast(), &b, P::FLOOR, |v| f(&x, &wt, v));
    rep
}

/// Max pooling; coordinates whose ±step perturbation changes any window's
/// argmax are skipped.
pub fn pool_case<P: Precision>(rng: &mut Rng, dims: (usize, usize, usize, usize)) -> GradReport {
    let (n, c, h, w) = dims;
    let x = random_tensor(rng, &[n, c, h, w], 1.0);
    let r = random_tensor(rng, &[n, c, h / 2, w / 2], 1.0);
    let (_, cache) = maxpool_forward(&x.cast::<P>()).unwrap();
    let dx: Tensor<f64> = maxpool_backward(&r.cast::<P>(), &cache).unwrap().cast();
    let (_, base) = maxpool_forward(&x).unwrap();

    let mut rep = GradReport {
        cases: 1,
        ..Default::default()
    };
    for i in 0..x.len() {
        let stable = [STEP, -STEP].iter().all(|&d| {
            let mut v = x.data().to_vec();
            v[i] += d;
            maxpool_forward(&with_value(&x, &v)).unwrap().1.argmax == base.argmax
        });
        if !stable {
            rep.skipped += 1;
            continue;
        }
        let numeric = central_difference(
            |v| dot(&maxpool_forward(&with_value(&x, v)).unwrap().0, &r),
            x.data(),
            i,
            STEP,
        );
        rep.compare(dx.data()[i], numeric, P::FLOOR);
    }
    rep
}

/// ReLU away from the kink at zero.
pub fn relu_case<P: Precision>(rng: &mut Rng, len: usize) -> GradReport {
    let x = random_tensor(rng, &[len], 1.0);
    let r = random_tensor(rng, &[len], 1.0);
    let (_, cache) = relu(&x.cast::<P>());
    let dx: Tensor<f64> = relu_backward(&r.cast::<P>(), &cache).unwrap().cast();
    let mut rep = GradReport {
        cases: 1,
        ..Default::default()
    };
    for i in 0..len {
        if x.data()[i].abs() < 10.0 * STEP {
            rep.skipped += 1;
            continue;
        }
        let numeric = central_difference(|v| dot(&relu(&with_value(&x, v)).0, &r), x.data(), i, STEP);
        rep.compare(dx.data()[i], numeric, P::FLOOR);
    }
    rep
}

pub fn dense_case<P: Precision>(rng: &mut Rng, n: usize, d: usize, out: usize) -> GradReport {
    let x = random_tensor(rng, &[n, d], 1.0);
    let wt = random_tensor(rng, &[d, out], 1.0);
    let b = random_tensor(rng, &[out], 0.5);
    let r = random_tensor(rng, &[n, out], 1.0);
    let layer = DenseLayer::new(wt.cast::<P>(), b.cast::<P>()).unwrap();
    let (_, cache) = dense_forward(&x.cast::<P>(), &layer).unwrap();
    let g = dense_backward(&r.cast::<P>(), &cache, &layer).unwrap();
    let f = |x: &Tensor<f64>, wt: &Tensor<f64>, b: &Tensor<f64>| {
        let l = DenseLayer::new(wt.clone(), b.clone()).unwrap();
        dot(&dense_forward(x, &l).unwrap().0, &r)
    };
    let mut rep = GradReport {
        cases: 1,
        ..Default::default()
    };
    compare_all(&mut rep, &g.dx.cast(), &x, P::FLOOR, |v| f(v, &wt, &b));
    compare_all(&mut rep, &g.dweights.cast(), &wt, P::FLOOR, |v| f(&x, v, &b));
    compare_all(&mut rep, &g.dbias.cast(), &b, P::FLOOR, |v| f(&x, &wt, v));
    rep
}

pub fn softmax_case<P: Precision>(rng: &mut Rng, n: usize, k: usize) -> GradReport {
    let z = random_tensor(rng, &[n, k], 3.0);
    let r = random_tensor(rng, &[n, k], 1.0);
    let p = softmax(&z.cast::<P>()).unwrap();
    let dz: Tensor<f64> = softmax_backward(&r.cast::<P>(), &p).unwrap().cast();
    let mut rep = GradReport {
        cases: 1,
        ..Default::default()
    };
    compare_all(&mut rep, &dz, &z, P::FLOOR, |v| dot(&softmax(v).unwrap(), &r));
    rep
}

/// Small model configurations for end-to-end checks.
pub fn tiny_specs() -> Vec<ModelSpec> {
    vec![
        ModelSpec {
            input_size: 8,
            in_channels: 1,
            conv: vec![ConvStage { filters: 2, kernel: 3 }],
            hidden: 5,
            classes: 2,
        },
        ModelSpec {
            input_size: 12,
            in_channels: 2,
            conv: vec![ConvStage { filters: 2, kernel: 3 }, ConvStage { filters: 3, kernel: 2 }],
            hidden: 6,
            classes: 4,
        },
    ]
}

pub fn random_params(rng: &mut Rng, spec: &ModelSpec) -> ModelParams<f64> {
    let zeros = ModelParams::<f64>::zeros(spec).unwrap();
    let tensors = zeros
        .tensors()
        .into_iter()
        .map(|t| random_tensor(rng, t.shape(), 0.6))
        .collect();
    ModelParams::from_tensors(spec, tensors).unwrap()
}

pub fn random_batch(rng: &mut Rng, spec: &ModelSpec, n: usize) -> (Tensor<f64>, Tensor<f64>) {
    let s = spec.input_size;
    let x = Tensor::from_vec(
        &[n, spec.in_channels, s, s],
        (0..n * spec.in_channels * s * s).map(|_| rng.next_f64()).collect(),
    )
    .unwrap();
    let mut y = Tensor::zeros(&[n, spec.classes]).unwrap();
    for i in 0..n {
        y.set(&[i, rng.below(spec.classes as u64) as usize], 1.0).unwrap();
    }
    (x, y)
}

pub fn model_loss(params: &ModelParams<f64>, x: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    let (p, _) = model_forward(params, x).unwrap();
    categorical_cross_entropy(&p, y).unwrap().0
}

/// Mean cross-entropy of a random batch through a small model; every
/// parameter is checked unless perturbing it changes the activation pattern.
pub fn model_case<P: Precision>(rng: &mut Rng, spec: &ModelSpec, n: usize) -> GradReport {
    let params = random_params(rng, spec);
    let (x, y) = random_batch(rng, spec, n);

    let pp = params.cast::<P>();
    let (probs, cache) = model_forward(&pp, &x.cast::<P>()).unwrap();
    let (_, dlogits) = categorical_cross_entropy(&probs, &y.cast::<P>()).unwrap();
    let grads = model_backward(&pp, &cache, Upstream::Logits(&dlogits)).unwrap().cast::<f64>();

    let (_, base_cache) = model_forward(&params, &x).unwrap();
    let base_pattern = base_cache.activation_pattern();

    let mut rep = GradReport {
        cases: 1,
        ..Default::default()
    };
    let flat: Vec<Tensor<f64>> = params.tensors().into_iter().cloned().collect();
    let gflat = grads.tensors();
    for (ti, t) in flat.iter().enumerate() {
        for i in 0..t.len() {
            let eval = |delta: f64| {
                let mut tensors = flat.clone();
                tensors[ti].data_mut()[i] += delta;
                let p = ModelParams::from_tensors(spec, tensors).unwrap();
                let (probs, cache) = model_forward(&p, &x).unwrap();
                let loss = categorical_cross_entropy(&probs, &y).unwrap().0;
                (loss, cache.activation_pattern() == base_pattern)
            };
            let (up, ok_up) = eval(STEP);
            let (down, ok_down) = eval(-STEP);
            if !(ok_up && ok_down) {
                rep.skipped += 1;
                continue;
            }
            rep.compare(gflat[ti].data()[i], (up - down) / (2.0 * STEP), P::FLOOR);
        }
    }
    rep
}

/// Runs the full randomized suite at precision `P`. Returns one report per
/// layer kind.
pub fn suite<P: Precision>(seed: u64) -> Vec<(&'static str, GradReport)> {
    let mut rng = Rng::new(seed);
    let mut conv = GradReport::default();
    conv.merge(conv_case::<P>(&mut rng, (1, 1, 5, 5), 1, 3));
    for _ in 0..29 {
        let n = 1 + rng.below(2) as usize;
        let c = 1 + rng.below(3) as usize;
        let k = 1 + rng.below(3) as usize;
        let h = k + rng.below(4) as usize;
        let w = k + rng.below(4) as usize;
        let f = 1 + rng.below(3) as usize;
        conv.merge(conv_case::<P>(&mut rng, (n, c, h, w), f, k));
    }
    let mut pool = GradReport::default();
    pool.merge(pool_case::<P>(&mut rng, (1, 1, 6, 6)));
    for _ in 0..24 {
        let dims = (
            1 + rng.below(2) as usize,
            1 + rng.below(3) as usize,
            2 + rng.below(6) as usize,
            2 + rng.below(6) as usize,
        );
        pool.merge(pool_case::<P>(&mut rng, dims));
    }
    let mut act = GradReport::default();
    for _ in 0..15 {
        let len = 1 + rng.below(40) as usize;
        act.merge(relu_case::<P>(&mut rng, len));
    }
    let mut dense = GradReport::default();
    for _ in 0..20 {
        let (n, d, o) = (1 + rng.below(3) as usize, 1 + rng.below(6) as usize, 1 + rng.below(5) as usize);
        dense.merge(dense_case::<P>(&mut rng, n, d, o));
    }
    let mut soft = GradReport::default();
    for _ in 0..10 {
        let (n, k) = (1 + rng.below(3) as usize, 2 + rng.below(4) as usize);
        soft.merge(softmax_case::<P>(&mut rng, n, k));
    }
    let mut model = GradReport::default();
    for spec in tiny_specs() {
        for _ in 0..4 {
            let n = 1 + rng.below(3) as usize;
            model.merge(model_case::<P>(&mut rng, &spec, n));
        }
    }
    vec![
        ("conv2d", conv),
        ("maxpool", pool),
        ("relu", act),
        ("dense", dense),
        ("softmax", soft),
        ("model", model),
    ]
}
