//! Forward and backward passes of every layer in the classifier, and the
//! composed model.

mod activation;
mod conv;
mod dense;
mod model;
mod pool;

pub use activation::{relu, relu_backward, softmax, softmax_backward, ReluCache};
pub use conv::{conv2d_backward, conv2d_forward, ConvCache, ConvGrads, ConvLayer};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseGrads, DenseLayer};
pub use model::{model_backward, model_forward, ConvStage, LayerShape, ModelCache, ModelParams, ModelSpec, Upstream};
pub use pool::{maxpool_backward, maxpool_forward, PoolCache, POOL};
