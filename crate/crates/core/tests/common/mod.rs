#![allow(dead_code)]

use sann::linalg::normal_sample;
use sann::nn::{mse, mse_gradient, Activation, MlpConfig, MlpNetwork, Mode};
use sann::{Matrix, Rng};

/// Denominator floor for relative errors, so parameters whose true gradient
/// is (numerically) zero are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

fn loss(net: &MlpNetwork<f64>, x: &Matrix, y: &Matrix) -> f64 {
    mse(&net.predict(x).unwrap(), y).unwrap()
}

/// Largest relative error between backprop and central differences over
/// every weight and bias of `net`, with MSE against `y`.
pub fn gradient_check(net: &MlpNetwork<f64>, x: &Matrix, y: &Matrix, h: f64) -> f64 {
    let cache = net.forward(x, Mode::Eval).unwrap();
    let up = mse_gradient(cache.output(), y).unwrap();
    let grads = net.backward(&cache, &up).unwrap();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for k in 0..net.layers().len() {
        let n_w = net.layers()[k].weights.as_slice().len();
        for i in 0..n_w {
            let orig = net.layers()[k].weights.as_slice()[i];
            probe.layers_mut()[k].weights.as_mut_slice()[i] = orig + h;
            let up = loss(&probe, x, y);
            probe.layers_mut()[k].weights.as_mut_slice()[i] = orig - h;
            let down = loss(&probe, x, y);
            probe.layers_mut()[k].weights.as_mut_slice()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(grads.layers[k].weights.as_slice()[i], fd));
        }
        for i in 0..net.layers()[k].bias.len() {
            let orig = net.layers()[k].bias[i];
            probe.layers_mut()[k].bias[i] = orig + h;
            let up = loss(&probe, x, y);
            probe.layers_mut()[k].bias[i] = orig - h;
            let down = loss(&probe, x, y);
            probe.layers_mut()[k].bias[i] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(grads.layers[k].bias[i], fd));
        }
    }
    worst
}

/// Random small network: 1 to 3 hidden layers of width 1 to 8, random biases.
pub fn random_small_net(rng: &mut Rng, act: Activation) -> MlpNetwork<f64> {
    let depth = 1 + rng.below(3);
    let widths: Vec<usize> = (0..depth).map(|_| 1 + rng.below(8)).collect();
    let cfg = MlpConfig::new(1 + rng.below(5), &widths, 1 + rng.below(3)).hidden_activation(act);
    let mut net = MlpNetwork::init(&cfg, rng).unwrap();
    for l in net.layers_mut() {
        for b in l.bias.iter_mut() {
            *b = 0.1 * rng.normal();
        }
    }
    net
}

pub fn gaussian(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    normal_sample(rng, rows, cols, 0.0, 1.0).unwrap()
}
