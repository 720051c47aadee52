use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::scalar::Real;

use super::adam::Adam;
use super::backprop::Mode;
use super::network::MlpNetwork;

/// Mean over all entries of the squared difference.
pub fn mse<T: Real>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<T> {
    if pred.shape() != target.shape() {
        return Err(Error::invalid(format!(
            "mse of {:?} against {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.as_slice().len();
    if n == 0 {
        return Ok(T::ZERO);
    }
    let ss: T = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(ss / T::of(n as f64))
}

/// d mse / d pred.
pub fn mse_gradient<T: Real>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<Matrix<T>> {
    let diff = pred.sub(target)?;
    let n = T::of(pred.as_slice().len().max(1) as f64);
    Ok(diff.scale(T::TWO / n))
}

#[derive(Debug, Clone)]
pub struct EpochOutcome<T> {
    /// Sample-weighted mean of the minibatch training losses (train mode).
    pub mean_loss: T,
    /// `y_i - f(x_i)` on the training set, evaluated after the epoch in eval mode.
    pub residuals: Matrix<T>,
    pub optimizer_steps: usize,
}

/// One shuffled minibatch pass of Adam on MSE.
pub fn train_epoch<T: Real>(
    net: &mut MlpNetwork<T>,
    data: &Dataset<T>,
    opt: &mut Adam<T>,
    rng: &mut Rng,
    batch_size: usize,
) -> Result<EpochOutcome<T>> {
    if data.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    if data.output_width() != net.output_width() {
        return Err(Error::invalid(format!(
            "targets have {} columns, network outputs {}",
            data.output_width(),
            net.output_width()
        )));
    }
    let order = rng.permutation(data.len());
    let mut total = T::ZERO;
    let mut steps = 0;
    for chunk in order.chunks(batch_size) {
        let batch = data.subset(chunk);
        let cache = net.forward(batch.features(), Mode::Train(rng))?;
        let loss = mse(cache.output(), batch.targets())?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite training loss at step {steps}"
            )));
        }
        let grad = mse_gradient(cache.output(), batch.targets())?;
        let grads = net.backward(&cache, &grad)?;
        opt.step(net, &grads)?;
        total = total + loss * T::of(chunk.len() as f64);
        steps += 1;
    }
    let residuals = data.targets().sub(&net.predict(data.features())?)?;
    if !residuals.is_finite() {
        return Err(Error::Divergence(
            "non-finite predictions after epoch".into(),
        ));
    }
    Ok(EpochOutcome {
        mean_loss: total / T::of(data.len() as f64),
        residuals,
        optimizer_steps: steps,
    })
}

/// Eval-mode MSE of `net` on `data`.
pub fn evaluate_mse<T: Real>(net: &MlpNetwork<T>, data: &Dataset<T>) -> Result<T> {
    mse(&net.predict(data.features())?, data.targets())
}
