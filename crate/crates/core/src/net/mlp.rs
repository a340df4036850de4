//! Dense feed-forward networks with a batched forward pass and analytic
//! backpropagation.
//!
//! Parameters live in one flat buffer. Layer `k` stores its weight matrix
//! (`fan_out x fan_in`, row-major) followed by its bias vector, so optimizers and
//! target smoothing can treat a network as a plain slice of reals. Inputs and
//! outputs are row-major `batch x dim` matrices.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputTransform {
    Identity,
    /// `limit * tanh(z)`, strictly inside `(-limit, limit)`.
    ScaledTanh { limit: f64 },
}

/// Offsets of one layer inside the flat parameter buffer.
#[derive(Debug, Clone, Copy)]
pub struct LayerView {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

impl LayerView {
    fn end(&self) -> usize {
        self.bias + self.fan_out
    }
}

fn layer_views(sizes: &[usize]) -> impl Iterator<Item = LayerView> + '_ {
    let mut offset = 0;
    sizes.windows(2).map(move |w| {
        let view = LayerView {
            fan_in: w[0],
            fan_out: w[1],
            weights: offset,
            bias: offset + w[0] * w[1],
        };
        offset = view.end();
        view
    })
}

fn param_count(sizes: &[usize]) -> usize {
    layer_views(sizes).last().map_or(0, |l| l.end())
}

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Weights and biases of a dense network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
    hidden_activation: Activation,
    output_transform: OutputTransform,
    #[serde(skip, default = "next_generation")]
    generation: u64,
}

impl PartialEq for MlpParams {
    fn eq(&self, other: &Self) -> bool {
        self.layer_sizes == other.layer_sizes
            && self.hidden_activation == other.hidden_activation
            && self.output_transform == other.output_transform
            && self.values == other.values
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::InvalidLayerSizes(sizes.to_vec()));
    }
    Ok(())
}

impl MlpParams {
    /// Builds a network from explicit parameter values laid out as described in
    /// the module docs.
    pub fn from_values(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_transform: OutputTransform,
        values: Vec<f64>,
    ) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let expected = param_count(layer_sizes);
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} parameters for {layer_sizes:?}, got {}",
                values.len()
            )));
        }
        if let OutputTransform::ScaledTanh { limit } = output_transform {
            if !(limit > 0.0 && limit.is_finite()) {
                return Err(Error::Config(format!("scaled_tanh limit must be positive, got {limit}")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            values,
            hidden_activation,
            output_transform,
            generation: next_generation(),
        })
    }

    pub fn zeros(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_transform: OutputTransform,
    ) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let n = param_count(layer_sizes);
        Self::from_values(layer_sizes, hidden_activation, output_transform, vec![0.0; n])
    }

    /// Xavier (Glorot) uniform weights, zero biases.
    pub fn init_xavier(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_transform: OutputTransform,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, hidden_activation, output_transform)?;
        let views: Vec<LayerView> = net.layers().collect();
        for l in views {
            let bound = xavier_bound(l.fan_in, l.fan_out);
            for w in &mut net.values[l.weights..l.bias] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_transform(&self) -> OutputTransform {
        self.output_transform
    }

    pub fn layers(&self) -> impl Iterator<Item = LayerView> + '_ {
        layer_views(&self.layer_sizes)
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the flat buffer. Invalidates outstanding caches.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.generation = next_generation();
        &mut self.values
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let l = self.layer(layer);
        &self.values[l.weights..l.bias]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let l = self.layer(layer);
        &self.values[l.bias..l.end()]
    }

    fn layer(&self, index: usize) -> LayerView {
        self.layers()
            .nth(index)
            .unwrap_or_else(|| panic!("layer {index} out of range for {:?}", self.layer_sizes))
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    /// Runs `batch` inputs (row-major, `batch x input_dim`) through the network.
    pub fn forward(&self, inputs: &[f64], batch: usize) -> Result<ForwardCache> {
        let in_dim = self.input_dim();
        if batch == 0 || inputs.len() != batch * in_dim {
            return Err(Error::ShapeMismatch(format!(
                "forward: {} inputs for batch {batch} x dim {in_dim}",
                inputs.len()
            )));
        }
        let n_layers = self.layer_sizes.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(inputs.to_vec());
        for (k, l) in self.layers().enumerate() {
            let x = activations.last().expect("input pushed");
            let mut z = vec![0.0; batch * l.fan_out];
            let bias = &self.values[l.bias..l.end()];
            for row in z.chunks_exact_mut(l.fan_out) {
                row.copy_from_slice(bias);
            }
            // z = x * W^T + b
            gemm(
                batch,
                l.fan_in,
                l.fan_out,
                x,
                (l.fan_in as isize, 1),
                &self.values[l.weights..l.bias],
                (1, l.fan_in as isize),
                &mut z,
                (l.fan_out as isize, 1),
                1.0,
            );
            if k + 1 < n_layers {
                match self.hidden_activation {
                    Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
                    Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
                }
            } else if let OutputTransform::ScaledTanh { limit } = self.output_transform {
                // tanh rounds to exactly 1.0 for large inputs; keep the bound strict.
                let inner = limit.next_down();
                z.iter_mut().for_each(|v| *v = (limit * v.tanh()).clamp(-inner, inner));
            }
            activations.push(z);
        }
        Ok(ForwardCache {
            batch,
            generation: self.generation,
            layer_sizes: self.layer_sizes.clone(),
            activations,
        })
    }

    /// Forward pass without keeping the cache around.
    pub fn predict(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut cache = self.forward(inputs, batch)?;
        Ok(cache.activations.pop().expect("output layer"))
    }

    /// Convenience for scalar-output networks on a single input.
    pub fn predict_one(&self, input: &[f64]) -> Result<f64> {
        Ok(self.predict(input, 1)?[0])
    }

    fn check_cache(&self, cache: &ForwardCache, output_gradient: &[f64]) -> Result<()> {
        if cache.layer_sizes != self.layer_sizes {
            return Err(Error::StaleCache(format!(
                "cache built for {:?}, network is {:?}",
                cache.layer_sizes, self.layer_sizes
            )));
        }
        if cache.generation != self.generation {
            return Err(Error::StaleCache("parameters changed since forward".into()));
        }
        if output_gradient.len() != cache.batch * self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "backward: output gradient has {} entries, expected {}",
                output_gradient.len(),
                cache.batch * self.output_dim()
            )));
        }
        Ok(())
    }

    /// Gradient of the output transform applied in place to `delta`.
    fn output_delta(&self, cache: &ForwardCache, output_gradient: &[f64]) -> Vec<f64> {
        let mut delta = output_gradient.to_vec();
        if let OutputTransform::ScaledTanh { limit } = self.output_transform {
            for (d, y) in delta.iter_mut().zip(cache.output()) {
                let t = y / limit;
                *d *= limit * (1.0 - t * t);
            }
        }
        delta
    }

    fn hidden_derivative(&self, delta: &mut [f64], post_activation: &[f64]) {
        match self.hidden_activation {
            Activation::Relu => {
                for (d, y) in delta.iter_mut().zip(post_activation) {
                    if *y <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            Activation::Tanh => {
                for (d, y) in delta.iter_mut().zip(post_activation) {
                    *d *= 1.0 - y * y;
                }
            }
        }
    }

    /// Backpropagates `output_gradient` (dL/d output, `batch x output_dim`),
    /// returning parameter gradients summed over the batch and the gradient with
    /// respect to each input row.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_gradient: &[f64],
    ) -> Result<(Gradients, Vec<f64>)> {
        self.backprop(cache, output_gradient, true)
            .map(|(g, x)| (g.expect("requested"), x))
    }

    /// Like [`backward`](Self::backward) but skips parameter gradients.
    pub fn input_gradient(&self, cache: &ForwardCache, output_gradient: &[f64]) -> Result<Vec<f64>> {
        self.backprop(cache, output_gradient, false).map(|(_, x)| x)
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        output_gradient: &[f64],
        want_params: bool,
    ) -> Result<(Option<Gradients>, Vec<f64>)> {
        self.check_cache(cache, output_gradient)?;
        let batch = cache.batch;
        let mut grads = want_params.then(|| vec![0.0; self.values.len()]);
        let mut delta = self.output_delta(cache, output_gradient);
        let views: Vec<LayerView> = self.layers().collect();
        for (k, l) in views.iter().enumerate().rev() {
            let x = &cache.activations[k];
            if let Some(g) = grads.as_mut() {
                // dW = delta^T * x
                gemm(
                    l.fan_out,
                    batch,
                    l.fan_in,
                    &delta,
                    (1, l.fan_out as isize),
                    x,
                    (l.fan_in as isize, 1),
                    &mut g[l.weights..l.bias],
                    (l.fan_in as isize, 1),
                    0.0,
                );
                let gb = &mut g[l.bias..l.end()];
                for row in delta.chunks_exact(l.fan_out) {
                    for (acc, d) in gb.iter_mut().zip(row) {
                        *acc += d;
                    }
                }
            }
            // dx = delta * W
            let mut dx = vec![0.0; batch * l.fan_in];
            gemm(
                batch,
                l.fan_out,
                l.fan_in,
                &delta,
                (l.fan_out as isize, 1),
                &self.values[l.weights..l.bias],
                (l.fan_in as isize, 1),
                &mut dx,
                (l.fan_in as isize, 1),
                0.0,
            );
            if k > 0 {
                self.hidden_derivative(&mut dx, x);
            }
            delta = dx;
        }
        let grads = grads.map(|values| Gradients {
            layer_sizes: self.layer_sizes.clone(),
            values,
        });
        Ok((grads, delta))
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Layer outputs from one forward pass, needed by backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    generation: u64,
    layer_sizes: Vec<usize>,
    /// `activations[0]` is the input, `activations[k + 1]` the output of layer `k`.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least one layer")
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.activations.pop().expect("at least one layer")
    }
}

/// Parameter gradients with the same flat layout as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layer_sizes: params.layer_sizes.clone(),
            values: vec![0.0; params.values.len()],
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let l = layer_views(&self.layer_sizes).nth(layer).expect("layer in range");
        &self.values[l.weights..l.bias]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let l = layer_views(&self.layer_sizes).nth(layer).expect("layer in range");
        &self.values[l.bias..l.end()]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|g| g.is_finite())
    }
}

/// `c = a * b + beta * c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    c: &mut [f64],
    (rsc, csc): (isize, isize),
    beta: f64,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices are at least as long as the strided views require; all
    // callers pass dense row- or column-major layouts of exactly these shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}
