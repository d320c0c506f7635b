//! Dense networks: layers, MLPs, and reverse-accumulation gradients.
//!
//! A network is a stack of affine layers with an element-wise activation:
//! `y = activation(W x + b)`. Weights are row-major `(out_dim, in_dim)`.
//! The forward pass records pre- and post-activation values per layer so the
//! backward pass can run without re-evaluating the network.
//!
//! All math is `f64`; determinism and oracle comparisons outrank speed here.
//!
//! Networks carry no interior mutability or locking: shared references give
//! concurrent read-only forwards on a snapshot, and mutation (optimizer
//! steps) requires the usual exclusive borrow.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    /// For tanh: `1 - y^2`; for identity: `1`.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// A dense layer `y = activation(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    /// Weights uniform in `[-1/sqrt(in_dim), +1/sqrt(in_dim)]`, bias zero.
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(in_dim > 0 && out_dim > 0, "layer dims must be > 0");
        let limit = 1.0 / (in_dim as f64).sqrt();
        let mut weights = Tensor::zeros(out_dim, in_dim);
        for w in weights.data_mut() {
            *w = rng.random_range(-limit..=limit);
        }
        DenseLayer {
            weights,
            bias: Tensor::zeros(out_dim, 1),
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Tensor::zeros(out_dim, in_dim),
            bias: Tensor::zeros(out_dim, 1),
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn forward_into(&self, input: &[f64], pre: &mut Vec<f64>, post: &mut Vec<f64>) {
        let (out_dim, in_dim) = self.weights.shape();
        debug_assert_eq!(input.len(), in_dim);
        pre.clear();
        post.clear();
        let w = self.weights.data();
        let b = self.bias.data();
        for o in 0..out_dim {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            let mut z = b[o];
            for (wi, xi) in row.iter().zip(input) {
                z += wi * xi;
            }
            pre.push(z);
            post.push(self.activation.apply(z));
        }
    }
}

/// Layer activations recorded by a forward pass, consumed by `Mlp::backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) input: Vec<f64>,
    pub(crate) pre: Vec<Vec<f64>>,
    pub(crate) post: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Final post-activation values (the network output).
    pub fn output(&self) -> &[f64] {
        self.post.last().map(|v| v.as_slice()).unwrap_or(&self.input)
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Complete prediction network: tanh hidden layers, identity output layer.
    /// `dims` lists `[in, hidden..., out]`.
    pub fn network<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "network needs at least input and output dims");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let act = if i + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Tanh
            };
            layers.push(DenseLayer::new(dims[i], dims[i + 1], act, rng));
        }
        Mlp { layers }
    }

    /// Feature extractor: tanh on every layer, including the last. Used for
    /// shared trunks whose output feeds further layers rather than a loss.
    pub fn feature_stack<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "feature stack needs at least one layer");
        let layers = (0..dims.len() - 1)
            .map(|i| DenseLayer::new(dims[i], dims[i + 1], Activation::Tanh, rng))
            .collect();
        Mlp { layers }
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("Mlp needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    format!("Mlp layer {} -> {}", i, i + 1),
                    format!("in_dim {}", pair[0].out_dim()),
                    format!("in_dim {}", pair[1].in_dim()),
                ));
            }
        }
        Ok(Mlp { layers })
    }

    #[inline]
    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Parameter tensors in canonical order: `[w0, b0, w1, b1, ...]`.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for layer in &self.layers {
            out.push(&layer.weights);
            out.push(&layer.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for layer in &mut self.layers {
            out.push(&mut layer.weights);
            out.push(&mut layer.bias);
        }
        out
    }

    #[inline]
    pub fn param_tensor_count(&self) -> usize {
        2 * self.layers.len()
    }

    /// Adds `delta` to one parameter element. Test and finite-difference hook.
    pub fn nudge_param(&mut self, tensor: usize, elem: usize, delta: f64) {
        let layer = tensor / 2;
        let t = if tensor % 2 == 0 {
            &mut self.layers[layer].weights
        } else {
            &mut self.layers[layer].bias
        };
        t.data_mut()[elem] += delta;
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.in_dim() {
            return Err(Error::shape(
                "Mlp::forward layer 0",
                format!("input dim {}", self.in_dim()),
                format!("input dim {}", input.len()),
            ));
        }
        let mut cache = ForwardCache {
            input: input.to_vec(),
            pre: Vec::with_capacity(self.layers.len()),
            post: Vec::with_capacity(self.layers.len()),
        };
        let mut x: &[f64] = input;
        for layer in &self.layers {
            let mut pre = Vec::new();
            let mut post = Vec::new();
            layer.forward_into(x, &mut pre, &mut post);
            cache.pre.push(pre);
            cache.post.push(post);
            x = cache.post.last().unwrap();
        }
        Ok((cache.post.last().unwrap().clone(), cache))
    }

    /// Tensor-shaped wrapper around [`Mlp::forward`] for column-vector IO.
    pub fn forward_tensor(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        if input.cols() != 1 {
            return Err(Error::shape(
                "Mlp::forward_tensor",
                "column vector (n, 1)".to_string(),
                format!("({}, {})", input.rows(), input.cols()),
            ));
        }
        let (out, cache) = self.forward(input.data())?;
        Ok((Tensor::column(&out), cache))
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let ok = cache.pre.len() == self.layers.len()
            && cache.post.len() == self.layers.len()
            && cache.input.len() == self.in_dim()
            && self
                .layers
                .iter()
                .zip(&cache.post)
                .all(|(l, p)| p.len() == l.out_dim());
        if ok {
            Ok(())
        } else {
            Err(Error::shape(
                "Mlp::backward cache",
                format!("cache from a matching forward pass ({} layers)", self.layers.len()),
                format!("cache with {} layers", cache.post.len()),
            ))
        }
    }

    /// Reverse accumulation from `grad_output` (dL/dy). Returns parameter
    /// gradients in canonical order plus dL/dx.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<(GradStack, Vec<f64>)> {
        let mut grads = GradStack::zeros_like(&self.params());
        let grad_input = self.backward_into(cache, grad_output, &mut grads, 0)?;
        Ok((grads, grad_input))
    }

    /// Like [`Mlp::backward`] but accumulates (+=) into `grads` starting at
    /// `offset`, so callers can assemble gradients of composite networks.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        grads: &mut GradStack,
        offset: usize,
    ) -> Result<Vec<f64>> {
        self.check_cache(cache)?;
        if grad_output.len() != self.out_dim() {
            return Err(Error::shape(
                "Mlp::backward grad_output",
                format!("dim {}", self.out_dim()),
                format!("dim {}", grad_output.len()),
            ));
        }
        let mut d_post = grad_output.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let post = &cache.post[l];
            let input: &[f64] = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let (out_dim, in_dim) = layer.weights.shape();

            let dw = grads.tensors[offset + 2 * l].data_mut();
            for o in 0..out_dim {
                let d_z = d_post[o] * layer.activation.grad_from_output(post[o]);
                // reuse d_post[o] as the post-activation-chain value for this layer
                d_post[o] = d_z;
                let row = &mut dw[o * in_dim..(o + 1) * in_dim];
                for (dwi, xi) in row.iter_mut().zip(input) {
                    *dwi += d_z * xi;
                }
            }
            let db = grads.tensors[offset + 2 * l + 1].data_mut();
            for (dbo, dz) in db.iter_mut().zip(&d_post) {
                *dbo += dz;
            }

            let mut d_input = vec![0.0; in_dim];
            let w = layer.weights.data();
            for o in 0..out_dim {
                let d_z = d_post[o];
                let row = &w[o * in_dim..(o + 1) * in_dim];
                for (di, wi) in d_input.iter_mut().zip(row) {
                    *di += wi * d_z;
                }
            }
            d_post = d_input;
        }
        Ok(d_post)
    }
}

/// Gradients (or any per-parameter quantity) mirroring a parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct GradStack {
    pub tensors: Vec<Tensor>,
}

impl GradStack {
    pub fn zeros_like(params: &[&Tensor]) -> Self {
        GradStack {
            tensors: params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.all_finite())
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            for g in t.data_mut() {
                *g *= s;
            }
        }
    }

    /// True when every element of every tensor is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.tensors.iter().all(|t| t.data().iter().all(|g| *g == 0.0))
    }
}
