//! A from-scratch convolutional classifier for four-class chest CT images.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense row-major arrays, `matmul` and `im2col`.
//! - [`layers`]: convolution, max-pooling, ReLU, dense and softmax with
//!   analytic backward passes, and the composed [`layers::ModelSpec`] chain.
//! - [`train`]: cross-entropy, Adam, Glorot initialisation and the
//!   deterministic epoch loop.
//! - [`metrics`]: accuracy, threshold and macro recall, exact one-vs-rest ROC
//!   AUC, confusion matrices.
//! - [`data`]: directory scan, PNG/JPEG decoding, preprocessing, the seeded
//!   hold-out split and batching.
//!
//! ```
//! use lungcnn::layers::{model_forward, ModelParams, ModelSpec};
//! use lungcnn::tensor::Tensor;
//!
//! let params = ModelParams::<f32>::zeros(&ModelSpec::default()).unwrap();
//! let x = Tensor::new(&[13, 1, 64, 64], 0.5).unwrap();
//! let (probs, _) = model_forward(&params, &x).unwrap();
//! assert_eq!(probs.shape(), &[13, 4]);
//! ```

pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
