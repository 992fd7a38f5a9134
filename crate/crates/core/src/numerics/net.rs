//! Fully-connected feed-forward networks over a single flat parameter buffer.
//!
//! Layer `l` occupies a contiguous slice of the buffer: an `out x in`
//! row-major weight matrix followed by an `out`-length bias. Keeping every
//! parameter in one vector makes optimizer updates, trust-region steps and
//! meta-level interpolation plain vector arithmetic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `h`.
    #[inline]
    fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, reused by `backward` and `jvp`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `outputs[0]` is the input; `outputs[l + 1]` is the post-activation of layer `l`.
    outputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("trace always holds the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNet {
    /// All-zero network with `hidden` activations on every layer but the last.
    pub fn zeros(sizes: &[usize], hidden: Activation) -> Result<Self, NumericsError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(NumericsError::InvalidArchitecture(format!("{sizes:?}")));
        }
        let layers = sizes.len() - 1;
        let mut activations = vec![hidden; layers];
        activations[layers - 1] = Activation::Identity;
        Ok(Self {
            sizes: sizes.to_vec(),
            activations,
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Fan-in scaled uniform initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    ///
    /// The output layer's weights are further multiplied by `output_scale`,
    /// which lets a policy head start close to uniform. Biases start at zero.
    pub fn random<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output_scale: f64,
        rng: &mut R,
    ) -> Result<Self, NumericsError> {
        let mut net = Self::zeros(sizes, hidden)?;
        let layers = net.num_layers();
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l + 1 == layers { output_scale } else { 1.0 };
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = rng.gen_range(-bound..bound) * scale;
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// Builds a network from explicit per-layer activations and parameters.
    pub fn from_parts(
        sizes: Vec<usize>,
        activations: Vec<Activation>,
        params: Vec<f64>,
    ) -> Result<Self, NumericsError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) || activations.len() != sizes.len() - 1
        {
            return Err(NumericsError::InvalidArchitecture(format!(
                "sizes {sizes:?} with {} activations",
                activations.len()
            )));
        }
        check_len("parameters", param_count(&sizes), params.len())?;
        check_finite("parameters", &params)?;
        Ok(Self {
            sizes,
            activations,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Replaces every parameter. Rejects wrong lengths and non-finite values
    /// without touching the network.
    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NumericsError> {
        check_len("parameters", self.params.len(), params.len())?;
        check_finite("parameters", params)?;
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Same architecture (sizes and activations), parameters aside.
    pub fn same_shape(&self, other: &DenseNet) -> bool {
        self.sizes == other.sizes && self.activations == other.activations
    }

    /// Returns `(weights, bias)` of layer `l`.
    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset = self.layer_offset(l);
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[offset..offset + n_in * n_out];
        let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        (w, b)
    }

    fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.sizes[..=l])
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NumericsError> {
        check_len("input", self.input_dim(), input.len())?;
        let mut x = input.to_vec();
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let act = self.activations[l];
            let n_in = self.sizes[l];
            x = b
                .iter()
                .enumerate()
                .map(|(o, &bias)| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    act.apply(dot(row, &x) + bias)
                })
                .collect();
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace, NumericsError> {
        check_len("input", self.input_dim(), input.len())?;
        let layers = self.num_layers();
        let mut outputs = Vec::with_capacity(layers + 1);
        let mut pre_activations = Vec::with_capacity(layers);
        outputs.push(input.to_vec());
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let n_in = self.sizes[l];
            let x = &outputs[l];
            let z: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(o, &bias)| dot(&w[o * n_in..(o + 1) * n_in], x) + bias)
                .collect();
            let act = self.activations[l];
            let h = z.iter().map(|&v| act.apply(v)).collect();
            pre_activations.push(z);
            outputs.push(h);
        }
        Ok(ForwardTrace {
            outputs,
            pre_activations,
        })
    }

    /// Gradient of `<output_grad, net(input)>` with respect to every parameter.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<Vec<f64>, NumericsError> {
        let trace = self.forward_trace(input)?;
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_backward(&trace, output_grad, &mut grad)?;
        Ok(grad)
    }

    /// Adds the parameter gradient for one traced sample into `grad`.
    pub fn accumulate_backward(
        &self,
        trace: &ForwardTrace,
        output_grad: &[f64],
        grad: &mut [f64],
    ) -> Result<(), NumericsError> {
        check_len("output gradient", self.output_dim(), output_grad.len())?;
        check_len("gradient buffer", self.params.len(), grad.len())?;
        if trace.outputs.len() != self.sizes.len() || trace.outputs[0].len() != self.input_dim() {
            return Err(NumericsError::DimensionMismatch {
                what: "forward trace",
                expected: self.sizes.len(),
                got: trace.outputs.len(),
            });
        }
        let mut delta: Vec<f64> = output_grad.to_vec();
        for l in (0..self.num_layers()).rev() {
            let act = self.activations[l];
            let z = &trace.pre_activations[l];
            let h = &trace.outputs[l + 1];
            for (o, d) in delta.iter_mut().enumerate() {
                *d *= act.derivative(z[o], h[o]);
            }
            let x = &trace.outputs[l];
            let n_in = self.sizes[l];
            let n_out = self.sizes[l + 1];
            let offset = self.layer_offset(l);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[offset + o * n_in..offset + (o + 1) * n_in];
                for (g, &xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
                grad[offset + n_in * n_out + o] += d;
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut next = vec![0.0; n_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (n, &wi) in next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *n += d * wi;
                    }
                }
                delta = next;
            }
        }
        Ok(())
    }

    /// Directional derivative of the output along a parameter-space tangent.
    pub fn jvp(&self, trace: &ForwardTrace, tangent: &[f64]) -> Result<Vec<f64>, NumericsError> {
        check_len("tangent", self.params.len(), tangent.len())?;
        let mut dx = vec![0.0; self.input_dim()];
        for l in 0..self.num_layers() {
            let n_in = self.sizes[l];
            let n_out = self.sizes[l + 1];
            let offset = self.layer_offset(l);
            let (w, _) = self.layer(l);
            let dw = &tangent[offset..offset + n_in * n_out];
            let db = &tangent[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = &trace.outputs[l];
            let act = self.activations[l];
            let z = &trace.pre_activations[l];
            let h = &trace.outputs[l + 1];
            dx = (0..n_out)
                .map(|o| {
                    let row = o * n_in..(o + 1) * n_in;
                    let dz = dot(&w[row.clone()], &dx) + dot(&dw[row], x) + db[o];
                    dz * act.derivative(z[o], h[o])
                })
                .collect();
        }
        Ok(dx)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_len(
    what: &'static str,
    expected: usize,
    got: usize,
) -> Result<(), NumericsError> {
    if expected == got {
        Ok(())
    } else {
        Err(NumericsError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<(), NumericsError> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(index) => Err(NumericsError::NonFinite { what, index }),
    }
}
