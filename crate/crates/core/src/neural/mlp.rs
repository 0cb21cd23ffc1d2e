use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Largest magnitude a tanh unit may emit, keeping outputs inside the open interval.
const TANH_BOUND: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh().clamp(-TANH_BOUND, TANH_BOUND),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Offset of the `outputs × inputs` row-major weight block in the flat parameters.
    pub weight_offset: usize,
    pub bias_offset: usize,
}

static NEXT_GENERATION: AtomicU64 = AtomicU64::new(1);

fn fresh_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Fully-connected feedforward network with all parameters in one flat vector.
#[derive(Debug)]
pub struct Mlp {
    layers: Vec<LayerShape>,
    params: Vec<f64>,
    /// Changes whenever parameters may have changed; ties caches to the values they saw.
    generation: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self { layers: self.layers.clone(), params: self.params.clone(), generation: fresh_generation() }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.params == other.params
    }
}

/// Activations of one batched forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    batch: usize,
    /// `values[0]` is the input; `values[l + 1]` is the output of layer `l`.
    values: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("cache holds at least the input")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Same layout as [`Mlp::params`].
    pub params: Vec<f64>,
    /// `batch × input_dim`, row-major.
    pub input: Vec<f64>,
}

/// `c (m×n) += a (m×k) · b (k×n)` with arbitrary strides.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], rsa: isize, csa: isize, b: &[f64], rsb: isize, csb: isize, c: &mut [f64]) {
    debug_assert!(c.len() >= m * n);
    // Safety: all pointers cover the index ranges implied by the given dimensions and strides,
    // which every caller derives from slices of exactly those sizes.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, 1.0, c.as_mut_ptr(), n as isize, 1);
    }
}

impl Mlp {
    fn layout(shape: &[usize], activations: &[Activation]) -> Result<(Vec<LayerShape>, usize), NeuralError> {
        if shape.len() < 2 || activations.len() != shape.len() - 1 || shape.iter().any(|&d| d == 0) {
            return Err(NeuralError::BadShape(format!(
                "shape {shape:?} with {} activations",
                activations.len()
            )));
        }
        let mut offset = 0;
        let layers = shape
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (inputs, outputs) = (w[0], w[1]);
                let layer = LayerShape {
                    inputs,
                    outputs,
                    activation,
                    weight_offset: offset,
                    bias_offset: offset + inputs * outputs,
                };
                offset += inputs * outputs + outputs;
                layer
            })
            .collect();
        Ok((layers, offset))
    }

    /// All-zero network.
    pub fn zeros(shape: &[usize], activations: &[Activation]) -> Result<Self, NeuralError> {
        let (layers, n) = Self::layout(shape, activations)?;
        Ok(Self { layers, params: vec![0.0; n], generation: fresh_generation() })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(shape: &[usize], activations: &[Activation], seed: u64) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(shape, activations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in net.layers.clone() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            let w = &mut net.params[layer.weight_offset..layer.bias_offset];
            for x in w {
                *x = rng.gen_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    /// Like [`Mlp::init`], but output-layer weights are uniform in
    /// `±output_bound`, keeping initial outputs near zero.
    pub fn init_small_output(
        shape: &[usize],
        activations: &[Activation],
        seed: u64,
        output_bound: f64,
    ) -> Result<Self, NeuralError> {
        let mut net = Self::init(shape, activations, seed)?;
        let last = net.layers[net.layers.len() - 1];
        let fan_bound = 1.0 / (last.inputs as f64).sqrt();
        for w in &mut net.params[last.weight_offset..last.bias_offset] {
            *w *= output_bound / fan_bound;
        }
        Ok(net)
    }

    pub fn from_params(shape: &[usize], activations: &[Activation], params: Vec<f64>) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(shape, activations)?;
        if params.len() != net.params.len() {
            return Err(NeuralError::BadShape(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn shape(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access. Invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation = fresh_generation();
        &mut self.params
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers == other.layers
    }

    fn check_input(&self, len: usize, batch: usize) -> Result<(), NeuralError> {
        if batch == 0 || len != batch * self.input_dim() {
            return Err(NeuralError::DimMismatch { expected: self.input_dim(), got_len: len, batch });
        }
        Ok(())
    }

    fn layer_forward(&self, layer: &LayerShape, input: &[f64], batch: usize) -> Vec<f64> {
        let (ni, no) = (layer.inputs, layer.outputs);
        let bias = &self.params[layer.bias_offset..layer.bias_offset + no];
        let mut out: Vec<f64> = bias.iter().copied().cycle().take(batch * no).collect();
        let w = &self.params[layer.weight_offset..layer.bias_offset];
        // out (batch×no) += input (batch×ni) · Wᵀ (ni×no)
        gemm(batch, ni, no, input, ni as isize, 1, w, 1, ni as isize, &mut out);
        for z in &mut out {
            *z = layer.activation.apply(*z);
        }
        out
    }

    /// Evaluate one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.forward_batch(input, 1)
    }

    /// Evaluate `batch` row-major input rows.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Result<Vec<f64>, NeuralError> {
        self.check_input(input.len(), batch)?;
        let mut x = self.layer_forward(&self.layers[0], input, batch);
        for layer in &self.layers[1..] {
            x = self.layer_forward(layer, &x, batch);
        }
        Ok(x)
    }

    /// Forward pass retaining every layer output for [`Mlp::backward`].
    pub fn forward_cached(&self, input: &[f64], batch: usize) -> Result<ForwardCache, NeuralError> {
        self.check_input(input.len(), batch)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(input.to_vec());
        for layer in &self.layers {
            let next = self.layer_forward(layer, values.last().expect("non-empty"), batch);
            values.push(next);
        }
        Ok(ForwardCache { generation: self.generation, batch, values })
    }

    fn check_cache(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<(), NeuralError> {
        if cache.generation != self.generation || cache.values.len() != self.layers.len() + 1 {
            return Err(NeuralError::StaleCache);
        }
        if upstream.len() != cache.batch * self.output_dim() {
            return Err(NeuralError::DimMismatch {
                expected: self.output_dim(),
                got_len: upstream.len(),
                batch: cache.batch,
            });
        }
        Ok(())
    }

    /// Reverse-mode gradients of `Σ output · upstream` with respect to every
    /// parameter and every input element.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Gradients, NeuralError> {
        self.backprop(cache, upstream, true).map(|(p, input)| Gradients { params: p, input })
    }

    /// Input gradient only; skips the parameter-gradient products.
    pub fn backward_input(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.backprop(cache, upstream, false).map(|(_, input)| input)
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        want_params: bool,
    ) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
        self.check_cache(cache, upstream)?;
        let batch = cache.batch;
        let mut grads = if want_params { vec![0.0; self.params.len()] } else { Vec::new() };
        let mut delta = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (ni, no) = (layer.inputs, layer.outputs);
            let out = &cache.values[l + 1];
            for (d, &y) in delta.iter_mut().zip(out) {
                *d *= layer.activation.derivative_from_output(y);
            }
            let input = &cache.values[l];
            if want_params {
                let (gw, gb) = grads[layer.weight_offset..layer.bias_offset + no].split_at_mut(ni * no);
                // dW (no×ni) = δᵀ (no×batch) · X (batch×ni)
                gemm(no, batch, ni, &delta, 1, no as isize, input, ni as isize, 1, gw);
                for row in delta.chunks_exact(no) {
                    for (b, &d) in gb.iter_mut().zip(row) {
                        *b += d;
                    }
                }
            }
            // dX (batch×ni) = δ (batch×no) · W (no×ni)
            let w = &self.params[layer.weight_offset..layer.bias_offset];
            let mut dx = vec![0.0; batch * ni];
            gemm(batch, no, ni, &delta, no as isize, 1, w, ni as isize, 1, &mut dx);
            delta = dx;
        }
        Ok((grads, delta))
    }
}
