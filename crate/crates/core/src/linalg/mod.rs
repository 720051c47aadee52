//! Dense matrices and the deterministic random stream everything else draws from.
//!
//! Layout is row-major with one sample per row throughout the crate.

mod matrix;
mod rng;

pub use matrix::Matrix;
pub use rng::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Matrix of i.i.d. Gaussian entries drawn from `rng`.
pub fn normal_sample<T: Real>(
    rng: &mut Rng,
    rows: usize,
    cols: usize,
    mean: f64,
    stddev: f64,
) -> Result<Matrix<T>> {
    if !(stddev >= 0.0) || !stddev.is_finite() || !mean.is_finite() {
        return Err(Error::invalid(format!(
            "normal_sample needs finite mean and stddev >= 0, got mean={mean}, stddev={stddev}"
        )));
    }
    let data = (0..rows * cols)
        .map(|_| T::of(mean + stddev * rng.normal()))
        .collect();
    Matrix::from_vec(rows, cols, data)
}
