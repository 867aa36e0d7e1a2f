use std::time::Instant;

use lungcnn::layers::{model_backward, model_forward, ModelSpec, Upstream};
use lungcnn::rng::Rng;
use lungcnn::tensor::Tensor;
use lungcnn::train::{categorical_cross_entropy, init_params};

fn main() {
    let spec = ModelSpec::default();
    let params = init_params::<f32>(&spec, &mut Rng::new(1)).unwrap();
    let mut rng = Rng::new(2);
    let x = Tensor::from_vec(&[13, 1, 64, 64], (0..13 * 4096).map(|_| rng.next_f64() as f32).collect()).unwrap();
    let mut y = Tensor::<f32>::zeros(&[13, 4]).unwrap();
    for i in 0..13 {
        y.set(&[i, i % 4], 1.0).unwrap();
    }
    let start = Instant::now();
    let reps = 10;
    for _ in 0..reps {
        let (p, cache) = model_forward(&params, &x).unwrap();
        let (_, d) = categorical_cross_entropy(&p, &y).unwrap();
        model_backward(&params, &cache, Upstream::Logits(&d)).unwrap();
    }
    println!("{:.1} ms per 13-sample step", start.elapsed().as_secs_f64() * 1000.0 / reps as f64);
}
