//! A small, self-contained function-approximation kit: dense feedforward
//! networks with hand-derived gradients, Adam, a tanh-squashed Gaussian
//! policy head and checkpoint blobs.
//!
//! Batches are row-major `(examples, features)` arrays.

mod checkpoint;
mod optim;
mod policy;

pub use checkpoint::{read_networks, write_networks, CheckpointError, CHECKPOINT_VERSION};
pub use optim::{Adam, ScalarAdam, StepStatus};
pub use policy::{GaussianPolicy, PolicySample, LOG_STD_MAX, LOG_STD_MIN};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearnError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
}

pub type Result<T> = std::result::Result<T, LearnError>;

pub fn mismatch_error(expected: impl ToString, found: impl ToString) -> LearnError {
    LearnError::ShapeMismatch { expected: expected.to_string(), found: found.to_string() }
}

use mismatch_error as mismatch;

/// Hidden-layer nonlinearity. The output layer is always affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softplus,
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Softplus => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Identity => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Softplus,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::Identity,
            _ => return None,
        })
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Softplus => softplus(z),
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid(z),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One affine layer, `y = x W + b` with `W` of shape `(inputs, outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }
}

/// Feedforward network. Also used as the gradient and moment container for
/// a network of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden: Activation,
    /// Width of the input when there are no layers.
    passthrough_dim: usize,
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (`inputs[0]` is the network input).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// Network with layer widths `sizes`, weights uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, rng: &mut R) -> Self {
        assert!(!sizes.is_empty(), "need at least the input width");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Dense {
                    w: Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-bound..=bound)),
                    b: Array1::from_shape_fn(w[1], |_| rng.gen_range(-bound..=bound)),
                }
            })
            .collect();
        Self { layers, hidden, passthrough_dim: sizes[0] }
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation) -> Result<Self> {
        for w in layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(mismatch(w[0].outputs(), w[1].inputs()));
            }
        }
        for l in &layers {
            if l.b.len() != l.outputs() {
                return Err(mismatch(l.outputs(), l.b.len()));
            }
        }
        let passthrough_dim = layers.first().map_or(0, |l| l.inputs());
        Ok(Self { layers, hidden, passthrough_dim })
    }

    /// Identity map on `dim` inputs.
    pub fn identity(dim: usize) -> Self {
        Self { layers: Vec::new(), hidden: Activation::Identity, passthrough_dim: dim }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense { w: Array2::zeros(l.w.raw_dim()), b: Array1::zeros(l.b.len()) })
                .collect(),
            hidden: self.hidden,
            passthrough_dim: self.passthrough_dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(self.passthrough_dim, |l| l.inputs())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.passthrough_dim, |l| l.outputs())
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.outputs()));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes() == other.sizes()
    }

    fn check_shape(&self, other: &Mlp) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(mismatch(format!("{:?}", self.sizes()), format!("{:?}", other.sizes())))
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|x| x.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Mlp) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.scaled_add(alpha, &b.w);
            a.b.scaled_add(alpha, &b.b);
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for l in &mut self.layers {
            l.w *= alpha;
            l.b *= alpha;
        }
    }

    /// Euclidean distance between parameter vectors.
    pub fn distance(&self, other: &Mlp) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.params().zip(other.params()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }

    /// Polyak averaging: `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        self.check_shape(online)?;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.w.zip_mut_with(&o.w, |t, &o| *t = tau * o + (1.0 - tau) * *t);
            t.b.zip_mut_with(&o.b, |t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
        Ok(())
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols == self.input_dim() {
            Ok(())
        } else {
            Err(mismatch(self.input_dim(), cols))
        }
    }

    /// Forward pass on a batch, keeping what backpropagation needs.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut a = x.to_owned();
        let last = self.layers.len().saturating_sub(1);
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w);
            z += &layer.b;
            inputs.push(a);
            if k < last {
                let act = self.hidden;
                let y = z.mapv(|v| act.apply(v));
                pre.push(z);
                a = y;
            } else {
                a = z;
            }
        }
        Ok((a, ForwardCache { inputs, pre }))
    }

    /// Forward pass without a cache.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        let last = self.layers.len().saturating_sub(1);
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w);
            z += &layer.b;
            if k < last {
                let act = self.hidden;
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        Ok(a)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.predict_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Backpropagates `upstream = dL/d(output)` through a cached pass.
    /// Returns parameter gradients and `dL/d(input)`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(Mlp, Array2<f64>)> {
        self.backward_impl(cache, upstream, true).map(|(g, dx)| (g.expect("grads requested"), dx))
    }

    /// Input gradient only; skips the weight-gradient products.
    pub fn backward_input(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.backward_impl(cache, upstream, false).map(|(_, dx)| dx)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
        want_params: bool,
    ) -> Result<(Option<Mlp>, Array2<f64>)> {
        if upstream.ncols() != self.output_dim() {
            return Err(mismatch(self.output_dim(), upstream.ncols()));
        }
        if cache.inputs.len() != self.layers.len() {
            return Err(mismatch(self.layers.len(), cache.inputs.len()));
        }
        let mut grads = if want_params { Some(self.zeros_like()) } else { None };
        let mut delta = upstream.to_owned();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if let Some(g) = grads.as_mut() {
                g.layers[k].w = cache.inputs[k].t().dot(&delta);
                g.layers[k].b = delta.sum_axis(Axis(0));
            }
            let mut prev = delta.dot(&layer.w.t());
            if k > 0 {
                let act = self.hidden;
                let z = &cache.pre[k - 1];
                let y = &cache.inputs[k];
                ndarray::Zip::from(&mut prev).and(z).and(y).for_each(|d, &z, &y| {
                    *d *= act.derivative(z, y);
                });
            }
            delta = prev;
        }
        Ok((grads, delta))
    }
}

/// Stacks row vectors into a batch.
pub fn stack_rows(rows: &[&[f64]]) -> Array2<f64> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), cols));
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).assign(&ndarray::ArrayView1::from(*r));
    }
    out
}

/// Concatenates two batches column-wise.
pub fn concat_cols(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.nrows(), b.nrows(), "row counts match");
    let mut out = Array2::zeros((a.nrows(), a.ncols() + b.ncols()));
    out.slice_mut(ndarray::s![.., ..a.ncols()]).assign(&a);
    out.slice_mut(ndarray::s![.., a.ncols()..]).assign(&b);
    out
}
