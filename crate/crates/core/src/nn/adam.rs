use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

use super::backprop::Gradients;
use super::network::MlpNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }
}

#[derive(Debug, Clone)]
struct Moments<T> {
    weights: Matrix<T>,
    bias: Vec<T>,
}

/// Adam state. Moment shapes mirror the network the optimizer was built for.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    config: AdamConfig,
    step: u64,
    first: Vec<Moments<T>>,
    second: Vec<Moments<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(net: &MlpNetwork<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Moments<T>> = net
            .layers()
            .iter()
            .map(|l| Moments {
                weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                bias: vec![T::ZERO; l.bias.len()],
            })
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    /// True when no update has touched the moment accumulators.
    pub fn moments_are_zero(&self) -> bool {
        self.first.iter().chain(&self.second).all(|m| {
            m.weights.as_slice().iter().all(|v| *v == T::ZERO)
                && m.bias.iter().all(|v| *v == T::ZERO)
        })
    }

    /// One bias-corrected Adam update of `net` from `grads`.
    pub fn step(&mut self, net: &mut MlpNetwork<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.layers.len() != self.first.len() || net.layers().len() != self.first.len() {
            return Err(Error::invalid(
                "optimizer, network and gradients disagree on layer count",
            ));
        }
        for ((g, m), l) in grads.layers.iter().zip(&self.first).zip(net.layers()) {
            if g.weights.shape() != m.weights.shape()
                || l.weights.shape() != m.weights.shape()
                || g.bias.len() != m.bias.len()
            {
                return Err(Error::invalid(
                    "optimizer state does not match parameter shapes",
                ));
            }
        }
        self.step += 1;
        let c = self.config;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let one = T::ONE;
        let bc1 = T::of(1.0 - c.beta1.powi(self.step.min(i32::MAX as u64) as i32));
        let bc2 = T::of(1.0 - c.beta2.powi(self.step.min(i32::MAX as u64) as i32));
        let lr = T::of(c.learning_rate);
        let eps = T::of(c.epsilon);

        let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        };

        for (k, layer) in net.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[k];
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            let params = layer.weights.as_mut_slice();
            let mw = m.weights.as_mut_slice();
            let vw = v.weights.as_mut_slice();
            for (i, p) in params.iter_mut().enumerate() {
                update(p, g.weights.as_slice()[i], &mut mw[i], &mut vw[i]);
            }
            for (i, p) in layer.bias.iter_mut().enumerate() {
                update(p, g.bias[i], &mut m.bias[i], &mut v.bias[i]);
            }
        }
        Ok(())
    }
}
