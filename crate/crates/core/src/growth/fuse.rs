use crate::error::{Error, Result};
use crate::linalg::{normal_sample, Matrix, Rng};
use crate::nn::{Activation, Layer, LayerSpec, MlpNetwork};
use crate::scalar::Real;

/// Fuses `residual` into `base`, producing one network whose hidden widths are
/// the layerwise sums of both.
///
/// * First layer: base weight rows, then residual rows; biases concatenated.
/// * Hidden-to-hidden layers: block matrix with base and residual weights on
///   the diagonal. The two off-diagonal cross blocks are Gaussian with
///   stddev `cross_init_scale × rms(residual layer weights)`.
/// * Output layer: weight columns concatenated, biases summed.
///
/// With `cross_init_scale == 0` the result computes exactly `f(x) + g(x)`.
pub fn fuse<T: Real>(
    base: &MlpNetwork<T>,
    residual: &MlpNetwork<T>,
    rng: &mut Rng,
    cross_init_scale: f64,
) -> Result<MlpNetwork<T>> {
    check_compatible(base, residual)?;
    if !(cross_init_scale >= 0.0) || !cross_init_scale.is_finite() {
        return Err(Error::invalid(format!(
            "cross init scale must be finite and >= 0, got {cross_init_scale}"
        )));
    }
    let n = base.layers().len();
    let mut layers = Vec::with_capacity(n);
    for (k, (b, r)) in base.layers().iter().zip(residual.layers()).enumerate() {
        let layer = if k == 0 {
            let w = b.weights.vstack(&r.weights)?;
            let mut bias = b.bias.clone();
            bias.extend_from_slice(&r.bias);
            let spec = LayerSpec {
                output_width: b.spec.output_width + r.spec.output_width,
                ..b.spec
            };
            Layer::new(w, bias, spec)?
        } else if k == n - 1 {
            let w = b.weights.hstack(&r.weights)?;
            let bias = b.bias.iter().zip(&r.bias).map(|(&x, &y)| x + y).collect();
            let spec = LayerSpec {
                input_width: b.spec.input_width + r.spec.input_width,
                ..b.spec
            };
            Layer::new(w, bias, spec)?
        } else {
            let sd = cross_init_scale * r.weights.rms().as_f64();
            let (bo, bi) = b.weights.shape();
            let (ro, ri) = r.weights.shape();
            // base outputs fed by residual units, and residual outputs fed by base units
            let upper_right: Matrix<T> = normal_sample(rng, bo, ri, 0.0, sd)?;
            let lower_left: Matrix<T> = normal_sample(rng, ro, bi, 0.0, sd)?;
            let top = b.weights.hstack(&upper_right)?;
            let bottom = lower_left.hstack(&r.weights)?;
            let mut bias = b.bias.clone();
            bias.extend_from_slice(&r.bias);
            let spec = LayerSpec {
                input_width: bi + ri,
                output_width: bo + ro,
                ..b.spec
            };
            Layer::new(top.vstack(&bottom)?, bias, spec)?
        };
        layers.push(layer);
    }
    MlpNetwork::from_layers(layers)
}

fn check_compatible<T: Real>(base: &MlpNetwork<T>, residual: &MlpNetwork<T>) -> Result<()> {
    if base.hidden_count() != residual.hidden_count() {
        return Err(Error::invalid(format!(
            "base has {} hidden layers, residual has {}",
            base.hidden_count(),
            residual.hidden_count()
        )));
    }
    if base.hidden_count() == 0 {
        return Err(Error::invalid("fusion needs at least one hidden layer"));
    }
    if base.input_width() != residual.input_width()
        || base.output_width() != residual.output_width()
    {
        return Err(Error::invalid(format!(
            "input/output widths differ: base {}->{}, residual {}->{}",
            base.input_width(),
            base.output_width(),
            residual.input_width(),
            residual.output_width()
        )));
    }
    for (k, (b, r)) in base.layers().iter().zip(residual.layers()).enumerate() {
        if b.spec.activation != r.spec.activation {
            return Err(Error::invalid(format!(
                "layer {k} activations differ ({} vs {})",
                b.spec.activation.name(),
                r.spec.activation.name()
            )));
        }
    }
    let out = base.layers()[base.layers().len() - 1].spec.activation;
    if out != Activation::Identity {
        return Err(Error::invalid("fusion requires an identity output layer"));
    }
    Ok(())
}
