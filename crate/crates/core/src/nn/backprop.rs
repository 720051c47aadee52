use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::scalar::Real;

use super::network::MlpNetwork;

/// Forward-pass mode. Training applies inverted dropout with masks drawn
/// from the supplied stream; evaluation is deterministic.
pub enum Mode<'a> {
    Train(&'a mut Rng),
    Eval,
}

/// Everything backprop needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input seen by each layer (index 0 is the network input).
    inputs: Vec<Matrix<T>>,
    pre_activations: Vec<Matrix<T>>,
    /// Scaled keep-masks (0 or 1/(1-p)) for layers that dropped units.
    masks: Vec<Option<Matrix<T>>>,
    output: Matrix<T>,
    stamp: u64,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }

    pub fn into_output(self) -> Matrix<T> {
        self.output
    }

    /// Post-dropout activations of hidden layer `k`.
    pub fn hidden_activation(&self, k: usize) -> &Matrix<T> {
        &self.inputs[k + 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

/// Parameter gradients, one entry per layer, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGradient<T>>,
    /// d loss / d input.
    pub input: Matrix<T>,
}

impl<T: Real> Gradients<T> {
    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|g| {
            g.weights.as_slice().iter().all(|v| *v == T::ZERO)
                && g.bias.iter().all(|v| *v == T::ZERO)
        })
    }
}

impl<T: Real> MlpNetwork<T> {
    pub fn forward(&self, x: &Matrix<T>, mut mode: Mode<'_>) -> Result<ForwardCache<T>> {
        self.check_input(x)?;
        let n = self.layers().len();
        let mut inputs = Vec::with_capacity(n + 1);
        let mut pre_activations = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        inputs.push(x.clone());
        for layer in self.layers() {
            let a_in = inputs.last().expect("non-empty");
            let z = a_in
                .matmul_transposed(&layer.weights)?
                .add_row_broadcast(&layer.bias)?;
            let act = layer.spec.activation;
            let mut a = z.map(|v| act.apply(v));
            let p = layer.spec.dropout_rate;
            let mask = match &mut mode {
                Mode::Train(rng) if p > 0.0 => {
                    let keep = T::of(1.0 / (1.0 - p));
                    let mut m = Matrix::zeros(a.rows(), a.cols());
                    for v in m.as_mut_slice() {
                        if !rng.bernoulli(p) {
                            *v = keep;
                        }
                    }
                    a = a.hadamard(&m)?;
                    Some(m)
                }
                _ => None,
            };
            pre_activations.push(z);
            masks.push(mask);
            inputs.push(a);
        }
        let output = inputs.pop().expect("non-empty");
        Ok(ForwardCache {
            inputs,
            pre_activations,
            masks,
            output,
            stamp: self.stamp(),
        })
    }

    /// Backpropagates `dloss_dout` (same shape as the cached output) through
    /// the cached pass, reusing its dropout masks.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        dloss_dout: &Matrix<T>,
    ) -> Result<Gradients<T>> {
        if cache.stamp != self.stamp() || cache.pre_activations.len() != self.layers().len() {
            return Err(Error::contract(
                "forward cache does not belong to this network's current parameters",
            ));
        }
        if dloss_dout.shape() != cache.output.shape() {
            return Err(Error::invalid(format!(
                "upstream gradient is {:?}, output is {:?}",
                dloss_dout.shape(),
                cache.output.shape()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers().len());
        let mut upstream = dloss_dout.clone();
        for (k, layer) in self.layers().iter().enumerate().rev() {
            if let Some(mask) = &cache.masks[k] {
                upstream = upstream.hadamard(mask)?;
            }
            let act = layer.spec.activation;
            let z = &cache.pre_activations[k];
            let mut dz = upstream;
            for (d, &zv) in dz.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *d = *d * act.derivative(zv);
            }
            let dw = dz.transposed_matmul(&cache.inputs[k])?;
            let db = dz.column_sums();
            upstream = dz.matmul(&layer.weights)?;
            grads.push(LayerGradient {
                weights: dw,
                bias: db,
            });
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: upstream,
        })
    }
}
