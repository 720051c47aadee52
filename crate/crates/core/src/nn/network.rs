use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{normal_sample, Matrix, Rng};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::ZERO),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// d act / dz, given the pre-activation `z`.
    #[inline]
    pub fn derivative<T: Real>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::ZERO {
                    T::ONE
                } else {
                    T::ZERO
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                T::ONE - t * t
            }
            Activation::Identity => T::ONE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    /// Standard deviation of the Gaussian weight init for a layer with this activation.
    pub fn init_stddev(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            Activation::Relu => (2.0 / fan_in as f64).sqrt(),
            Activation::Tanh | Activation::Identity => (2.0 / (fan_in + fan_out) as f64).sqrt(),
        }
    }
}

/// Shape and behaviour of one dense layer. `dropout_rate` applies to the
/// layer's output during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.output_width == 0 {
            return Err(Error::invalid("layer widths must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    /// `[output_width × input_width]`
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    pub spec: LayerSpec,
}

impl<T: Real> Layer<T> {
    pub fn new(weights: Matrix<T>, bias: Vec<T>, spec: LayerSpec) -> Result<Self> {
        spec.validate()?;
        if weights.shape() != (spec.output_width, spec.input_width) {
            return Err(Error::invalid(format!(
                "weights are {:?}, spec wants {}x{}",
                weights.shape(),
                spec.output_width,
                spec.input_width
            )));
        }
        if bias.len() != spec.output_width {
            return Err(Error::invalid(format!(
                "bias length {} != output width {}",
                bias.len(),
                spec.output_width
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("non-finite bias"));
        }
        Ok(Self {
            weights,
            bias,
            spec,
        })
    }
}

/// Architecture of a fully connected network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_width: usize,
    pub hidden_widths: Vec<usize>,
    pub output_width: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    /// Applied to every hidden layer's output; never to input or output.
    pub dropout_rate: f64,
}

impl MlpConfig {
    pub fn new(input_width: usize, hidden_widths: &[usize], output_width: usize) -> Self {
        Self {
            input_width,
            hidden_widths: hidden_widths.to_vec(),
            output_width,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
            dropout_rate: 0.0,
        }
    }

    pub fn hidden_activation(mut self, a: Activation) -> Self {
        self.hidden_activation = a;
        self
    }

    pub fn output_activation(mut self, a: Activation) -> Self {
        self.output_activation = a;
        self
    }

    pub fn dropout(mut self, p: f64) -> Self {
        self.dropout_rate = p;
        self
    }

    fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut widths = vec![self.input_width];
        widths.extend(&self.hidden_widths);
        widths.push(self.output_width);
        let last = widths.len() - 2;
        (0..=last)
            .map(|k| LayerSpec {
                input_width: widths[k],
                output_width: widths[k + 1],
                activation: if k == last {
                    self.output_activation
                } else {
                    self.hidden_activation
                },
                dropout_rate: if k == last { 0.0 } else { self.dropout_rate },
            })
            .collect()
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Fully connected feed-forward network.
#[derive(Debug, Clone)]
pub struct MlpNetwork<T> {
    layers: Vec<Layer<T>>,
    // Changes whenever parameters may have changed; ties caches to a parameter state.
    stamp: u64,
}

impl<T: Real> PartialEq for MlpNetwork<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl<T: Real> MlpNetwork<T> {
    /// Randomly initialized network: Kaiming-normal weights for ReLU layers,
    /// Xavier-normal otherwise, zero biases.
    pub fn init(config: &MlpConfig, rng: &mut Rng) -> Result<Self> {
        let layers = config
            .layer_specs()
            .into_iter()
            .map(|spec| {
                spec.validate()?;
                let sd = spec
                    .activation
                    .init_stddev(spec.input_width, spec.output_width);
                let w = normal_sample(rng, spec.output_width, spec.input_width, 0.0, sd)?;
                Layer::new(w, vec![T::ZERO; spec.output_width], spec)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].spec.output_width != pair[1].spec.input_width {
                return Err(Error::invalid(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].spec.output_width, pair[1].spec.input_width
                )));
            }
        }
        if layers.last().is_some_and(|l| l.spec.dropout_rate != 0.0) {
            return Err(Error::invalid("output layer cannot use dropout"));
        }
        Ok(Self {
            layers,
            stamp: fresh_stamp(),
        })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Mutable parameter access; invalidates outstanding forward caches.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        self.stamp = fresh_stamp();
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_width
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.spec.output_width)
            .collect()
    }

    pub fn hidden_count(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Architecture of this network (hidden activation/dropout read from the first layer).
    pub fn config(&self) -> MlpConfig {
        let first = &self.layers[0].spec;
        let last = &self.layers[self.layers.len() - 1].spec;
        MlpConfig {
            input_width: self.input_width(),
            hidden_widths: self.hidden_widths(),
            output_width: self.output_width(),
            hidden_activation: if self.layers.len() > 1 {
                first.activation
            } else {
                Activation::Identity
            },
            output_activation: last.activation,
            dropout_rate: if self.layers.len() > 1 {
                first.dropout_rate
            } else {
                0.0
            },
        }
    }

    /// Hash over every parameter bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for l in &self.layers {
            l.weights.shape().hash(&mut h);
            for v in l.weights.as_slice().iter().chain(&l.bias) {
                v.as_f64().to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub(crate) fn stamp(&self) -> u64 {
        self.stamp
    }

    /// Deterministic inference.
    pub fn predict(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in &self.layers {
            let z = a
                .matmul_transposed(&layer.weights)?
                .add_row_broadcast(&layer.bias)?;
            let act = layer.spec.activation;
            a = z.map(|v| act.apply(v));
        }
        Ok(a)
    }

    pub(crate) fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(Error::invalid(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.input_width()
            )));
        }
        Ok(())
    }
}
