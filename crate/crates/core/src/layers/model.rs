//! The composed classifier: a stack of conv → ReLU → max-pool stages, a
//! ReLU hidden dense layer, a dense output head and softmax.

use serde::{Deserialize, Serialize};

use super::activation::{relu, relu_backward, softmax, softmax_backward, ReluCache};
use super::conv::{conv2d_backward, conv2d_forward, ConvCache, ConvLayer};
use super::dense::{dense_backward, dense_forward, DenseCache, DenseLayer};
use super::pool::{maxpool_backward, maxpool_forward, PoolCache, POOL};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub filters: usize,
    /// Square kernel extent.
    pub kernel: usize,
}

/// Layer chain description. [`ModelSpec::default`] is the 64x64 four-class
/// network: conv(16, 3x3) → pool → conv(32, 3x3) → pool → conv(64, 5x5) →
/// pool → flatten(1600) → dense(260, ReLU) → dense(4) → softmax.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_size: usize,
    pub in_channels: usize,
    pub conv: Vec<ConvStage>,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            input_size: 64,
            in_channels: 1,
            conv: vec![
                ConvStage { filters: 16, kernel: 3 },
                ConvStage { filters: 32, kernel: 3 },
                ConvStage { filters: 64, kernel: 5 },
            ],
            hidden: 260,
            classes: 4,
        }
    }
}

/// Per-sample output shape of one layer in the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ModelSpec {
    /// Expected per-sample output shape of every layer, or an error if the
    /// chain collapses to nothing.
    pub fn shape_trace(&self) -> Result<Vec<LayerShape>> {
        if self.input_size == 0 || self.in_channels == 0 || self.hidden == 0 {
            return Err(Error::Config("model extents must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("model needs at least 2 classes".into()));
        }
        let mut trace = Vec::new();
        let mut size = self.input_size;
        for (i, stage) in self.conv.iter().enumerate() {
            if stage.filters == 0 || stage.kernel == 0 || stage.kernel > size {
                return Err(Error::Config(format!(
                    "conv stage {} ({} filters, kernel {}) does not fit a {size}x{size} input",
                    i + 1,
                    stage.filters,
                    stage.kernel
                )));
            }
            size = size - stage.kernel + 1;
            let channels = stage.filters;
            trace.push(LayerShape {
                name: format!("conv{}", i + 1),
                shape: vec![channels, size, size],
            });
            if size < POOL {
                return Err(Error::Config(format!(
                    "conv stage {} output {size}x{size} is too small to pool",
                    i + 1
                )));
            }
            size /= POOL;
            trace.push(LayerShape {
                name: format!("pool{}", i + 1),
                shape: vec![channels, size, size],
            });
        }
        trace.push(LayerShape {
            name: "flatten".into(),
            shape: vec![self.flat_dim()],
        });
        trace.push(LayerShape {
            name: "dense1".into(),
            shape: vec![self.hidden],
        });
        trace.push(LayerShape {
            name: "output".into(),
            shape: vec![self.classes],
        });
        Ok(trace)
    }

    /// Width of the flattened feature vector.
    pub fn flat_dim(&self) -> usize {
        let mut size = self.input_size;
        let mut channels = self.in_channels;
        for stage in &self.conv {
            size = size.saturating_sub(stage.kernel - 1) / POOL;
            channels = stage.filters;
        }
        channels * size * size
    }
}

/// Learnable weights of a [`ModelSpec`]. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T: Scalar = f32> {
    pub spec: ModelSpec,
    pub conv: Vec<ConvLayer<T>>,
    pub hidden: DenseLayer<T>,
    pub output: DenseLayer<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.shape_trace()?;
        let mut conv = Vec::with_capacity(spec.conv.len());
        let mut channels = spec.in_channels;
        for stage in &spec.conv {
            conv.push(ConvLayer::zeros(stage.filters, channels, stage.kernel)?);
            channels = stage.filters;
        }
        Ok(ModelParams {
            spec: spec.clone(),
            conv,
            hidden: DenseLayer::zeros(spec.flat_dim(), spec.hidden)?,
            output: DenseLayer::zeros(spec.hidden, spec.classes)?,
        })
    }

    /// Stable parameter names, in the same order as [`Self::tensors`].
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.conv.len() {
            names.push(format!("conv{}.weight", i + 1));
            names.push(format!("conv{}.bias", i + 1));
        }
        for layer in ["dense1", "output"] {
            names.push(format!("{layer}.weight"));
            names.push(format!("{layer}.bias"));
        }
        names
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out: Vec<&Tensor<T>> = Vec::new();
        for c in &self.conv {
            out.push(&c.weights);
            out.push(&c.bias);
        }
        out.extend([
            &self.hidden.weights,
            &self.hidden.bias,
            &self.output.weights,
            &self.output.bias,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = Vec::new();
        for c in &mut self.conv {
            out.push(&mut c.weights);
            out.push(&mut c.bias);
        }
        out.extend([
            &mut self.hidden.weights,
            &mut self.hidden.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]);
        out
    }

    /// Rebuilds parameters from tensors listed in [`Self::names`] order,
    /// checking every shape against `spec`.
    pub fn from_tensors(spec: &ModelSpec, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        let expected = params.tensors().len();
        if tensors.len() != expected {
            return Err(Error::shape(format!(
                "model needs {expected} tensors, got {}",
                tensors.len()
            )));
        }
        let names = params.names();
        for ((slot, t), name) in params.tensors_mut().into_iter().zip(tensors).zip(names) {
            if slot.shape() != t.shape() {
                return Err(Error::shape(format!(
                    "{name}: expected shape {:?}, got {:?}",
                    slot.shape(),
                    t.shape()
                )));
            }
            *slot = t;
        }
        Ok(params)
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let tensors = self.tensors().into_iter().map(|t| t.cast::<U>()).collect();
        ModelParams::from_tensors(&self.spec, tensors).expect("same spec, same shapes")
    }
}

#[derive(Debug, Clone)]
struct StageCache<T: Scalar> {
    conv: ConvCache<T>,
    relu: ReluCache,
    pool: PoolCache,
}

/// Everything [`model_backward`] needs from the forward pass.
#[derive(Debug, Clone)]
pub struct ModelCache<T: Scalar = f32> {
    stages: Vec<StageCache<T>>,
    pooled_shape: Vec<usize>,
    hidden: DenseCache<T>,
    hidden_relu: ReluCache,
    output: DenseCache<T>,
    probs: Tensor<T>,
    /// Observed per-sample shapes, one entry per layer.
    pub trace: Vec<LayerShape>,
}

impl<T: Scalar> ModelCache<T> {
    pub fn probs(&self) -> &Tensor<T> {
        &self.probs
    }

    /// Activation pattern of the forward pass: every ReLU mask and pooling
    /// argmax. Two passes with equal patterns lie on the same smooth piece of
    /// the loss surface.
    pub fn activation_pattern(&self) -> (Vec<bool>, Vec<usize>) {
        let mut masks = Vec::new();
        let mut argmax = Vec::new();
        for s in &self.stages {
            masks.extend_from_slice(&s.relu.active);
            argmax.extend_from_slice(&s.pool.argmax);
        }
        masks.extend_from_slice(&self.hidden_relu.active);
        (masks, argmax)
    }
}

fn per_sample(t: &Tensor<impl Scalar>) -> Vec<usize> {
    t.shape()[1..].to_vec()
}

/// Forward pass over a `[n, in_channels, size, size]` batch. Returns the
/// class probabilities `[n, classes]` and the cache.
pub fn model_forward<T: Scalar>(params: &ModelParams<T>, x: &Tensor<T>) -> Result<(Tensor<T>, ModelCache<T>)> {
    let spec = &params.spec;
    let s = x.shape4()?;
    if s.c != spec.in_channels || s.h != spec.input_size || s.w != spec.input_size {
        return Err(Error::shape(format!(
            "model expects [n, {}, {}, {}] input, got {:?}",
            spec.in_channels,
            spec.input_size,
            spec.input_size,
            x.shape()
        )));
    }
    let mut trace = Vec::new();
    let mut stages = Vec::with_capacity(params.conv.len());
    let mut act = x.clone();
    for (i, layer) in params.conv.iter().enumerate() {
        let (z, conv) = conv2d_forward(&act, layer)?;
        trace.push(LayerShape {
            name: format!("conv{}", i + 1),
            shape: per_sample(&z),
        });
        let (r, relu_cache) = relu(&z);
        let (p, pool) = maxpool_forward(&r)?;
        trace.push(LayerShape {
            name: format!("pool{}", i + 1),
            shape: per_sample(&p),
        });
        stages.push(StageCache {
            conv,
            relu: relu_cache,
            pool,
        });
        act = p;
    }
    let pooled_shape = act.shape().to_vec();
    let flat_dim: usize = pooled_shape[1..].iter().product();
    let flat = act.reshape(&[s.n, flat_dim])?;
    trace.push(LayerShape {
        name: "flatten".into(),
        shape: per_sample(&flat),
    });
    let (h, hidden) = dense_forward(&flat, &params.hidden)?;
    let (h, hidden_relu) = relu(&h);
    trace.push(LayerShape {
        name: "dense1".into(),
        shape: per_sample(&h),
    });
    let (logits, output) = dense_forward(&h, &params.output)?;
    trace.push(LayerShape {
        name: "output".into(),
        shape: per_sample(&logits),
    });
    let probs = softmax(&logits)?;
    let cache = ModelCache {
        stages,
        pooled_shape,
        hidden,
        hidden_relu,
        output,
        probs: probs.clone(),
        trace,
    };
    Ok((probs, cache))
}

/// Upstream gradient entering the network from the loss.
#[derive(Debug, Clone, Copy)]
pub enum Upstream<'a, T: Scalar> {
    /// Gradient with respect to the softmax probabilities.
    Probs(&'a Tensor<T>),
    /// Gradient with respect to the pre-softmax logits (fused loss).
    Logits(&'a Tensor<T>),
}

/// Gradients of every parameter, in a [`ModelParams`] of the same shape.
pub fn model_backward<T: Scalar>(
    params: &ModelParams<T>,
    cache: &ModelCache<T>,
    upstream: Upstream<'_, T>,
) -> Result<ModelParams<T>> {
    if cache.stages.len() != params.conv.len() {
        return Err(Error::shape("model cache does not match parameters"));
    }
    let dlogits = match upstream {
        Upstream::Probs(dp) => softmax_backward(dp, &cache.probs)?,
        Upstream::Logits(dz) => {
            dz.same_shape(&cache.probs, "logit gradient")?;
            dz.clone()
        }
    };
    let out = dense_backward(&dlogits, &cache.output, &params.output)?;
    let dh = relu_backward(&out.dx, &cache.hidden_relu)?;
    let hid = dense_backward(&dh, &cache.hidden, &params.hidden)?;

    let mut conv_grads = Vec::with_capacity(params.conv.len());
    let mut d = hid.dx.reshape(&cache.pooled_shape)?;
    for (layer, stage) in params.conv.iter().zip(&cache.stages).rev() {
        let dr = maxpool_backward(&d, &stage.pool)?;
        let dz = relu_backward(&dr, &stage.relu)?;
        let g = conv2d_backward(&dz, &stage.conv, layer)?;
        conv_grads.push(ConvLayer {
            weights: g.dweights,
            bias: g.dbias,
        });
        d = g.dx;
    }
    conv_grads.reverse();
    Ok(ModelParams {
        spec: params.spec.clone(),
        conv: conv_grads,
        hidden: DenseLayer {
            weights: hid.dweights,
            bias: hid.dbias,
        },
        output: DenseLayer {
            weights: out.dweights,
            bias: out.dbias,
        },
    })
}
