mod common;

use common::gradcheck::{
    conv_case, dense_case, model_case, pool_case, random_batch, random_params, random_tensor, relu_case, softmax_case,
    suite, tiny_specs, GradReport, Precision,
};
use lungcnn::layers::{conv2d_backward, conv2d_forward, model_backward, model_forward, ConvLayer, Upstream};
use lungcnn::rng::Rng;
use lungcnn::tensor::Tensor;
use lungcnn::train::categorical_cross_entropy;

fn assert_within<P: Precision>(what: &str, rep: GradReport) {
    assert!(rep.checked > 0, "{what}: nothing checked");
    assert!(
        rep.max_rel < P::TOL,
        "{what} ({}): max rel err {:.3e} over {} coordinates",
        P::NAME,
        rep.max_rel,
        rep.checked
    );
}

#[test]
fn conv_single_filter_5x5() {
    let mut rng = Rng::new(1);
    assert_within::<f32>("conv", conv_case::<f32>(&mut rng, (1, 1, 5, 5), 1, 3));
    assert_within::<f64>("conv", conv_case::<f64>(&mut rng, (1, 1, 5, 5), 1, 3));
}

#[test]
fn pool_6x6_random() {
    let mut rng = Rng::new(2);
    assert_within::<f32>("pool", pool_case::<f32>(&mut rng, (1, 1, 6, 6)));
    assert_within::<f64>("pool", pool_case::<f64>(&mut rng, (1, 1, 6, 6)));
}

#[test]
fn relu_dense_softmax() {
    let mut rng = Rng::new(3);
    assert_within::<f64>("relu", relu_case::<f64>(&mut rng, 30));
    assert_within::<f64>("dense", dense_case::<f64>(&mut rng, 3, 7, 4));
    assert_within::<f64>("softmax", softmax_case::<f64>(&mut rng, 3, 4));
    assert_within::<f32>("dense", dense_case::<f32>(&mut rng, 3, 7, 4));
}

#[test]
fn tiny_model_every_parameter() {
    let mut rng = Rng::new(4);
    let spec = &tiny_specs()[0];
    assert_eq!(spec.input_size, 8);
    assert_eq!(spec.classes, 2);
    let rep = model_case::<f64>(&mut rng, spec, 3);
    assert_within::<f64>("model", rep);
    let rep = model_case::<f32>(&mut rng, spec, 3);
    assert_within::<f32>("model", rep);
}

#[test]
fn randomized_suite_f64() {
    let reports = suite::<f64>(11);
    let cases: usize = reports.iter().map(|(_, r)| r.cases).sum();
    assert!(cases >= 100, "only {cases} cases");
    for (name, rep) in reports {
        assert_within::<f64>(name, rep);
    }
}

#[test]
fn randomized_suite_f32() {
    let reports = suite::<f32>(12);
    let cases: usize = reports.iter().map(|(_, r)| r.cases).sum();
    assert!(cases >= 100, "only {cases} cases");
    for (name, rep) in reports {
        assert_within::<f32>(name, rep);
    }
}

#[test]
fn fused_matches_chained_softmax() {
    let mut rng = Rng::new(5);
    for spec in tiny_specs() {
        let params = random_params(&mut rng, &spec);
        let (x, y) = random_batch(&mut rng, &spec, 4);
        let (probs, cache) = model_forward(&params, &x).unwrap();
        let (_, dlogits) = categorical_cross_entropy(&probs, &y).unwrap();
        let fused = model_backward(&params, &cache, Upstream::Logits(&dlogits)).unwrap();

        let n = probs.shape()[0] as f64;
        let dprobs = Tensor::from_vec(
            probs.shape(),
            probs.data().iter().zip(y.data()).map(|(p, t)| -t / (n * p)).collect(),
        )
        .unwrap();
        let chained = model_backward(&params, &cache, Upstream::Probs(&dprobs)).unwrap();
        for (a, b) in fused.tensors().iter().zip(chained.tensors()) {
            for (u, v) in a.data().iter().zip(b.data()) {
                assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0), "{u} vs {v}");
            }
        }
    }
}

#[test]
fn duplicated_batch_doubles_summed_gradient() {
    let mut rng = Rng::new(6);
    let x = random_tensor(&mut rng, &[1, 2, 5, 5], 1.0);
    let layer = ConvLayer::new(random_tensor(&mut rng, &[3, 2, 3, 3], 1.0), random_tensor(&mut rng, &[3], 1.0)).unwrap();
    let dy = random_tensor(&mut rng, &[1, 3, 3, 3], 1.0);

    let mut x2 = x.data().to_vec();
    x2.extend_from_slice(x.data());
    let x2 = Tensor::from_vec(&[2, 2, 5, 5], x2).unwrap();
    let mut dy2 = dy.data().to_vec();
    dy2.extend_from_slice(dy.data());
    let dy2 = Tensor::from_vec(&[2, 3, 3, 3], dy2).unwrap();

    let g1 = conv2d_backward(&dy, &conv2d_forward(&x, &layer).unwrap().1, &layer).unwrap();
    let g2 = conv2d_backward(&dy2, &conv2d_forward(&x2, &layer).unwrap().1, &layer).unwrap();
    for (a, b) in g1.dweights.data().iter().zip(g2.dweights.data()) {
        assert!((2.0 * a - b).abs() < 1e-12);
    }
    for (a, b) in g1.dbias.data().iter().zip(g2.dbias.data()) {
        assert!((2.0 * a - b).abs() < 1e-12);
    }
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut rng = Rng::new(7);
    let spec = &tiny_specs()[1];
    let params = random_params(&mut rng, spec).cast::<f32>();
    let (x, _) = random_batch(&mut rng, spec, 3);
    let (probs, cache) = model_forward(&params, &x.cast()).unwrap();
    let zero = probs.zeros_like();
    let grads = model_backward(&params, &cache, Upstream::Logits(&zero)).unwrap();
    assert!(grads.tensors().iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
}
