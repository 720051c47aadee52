//! Self-adapting neural networks.
//!
//! A fully connected base network `f(x)` is trained alongside a narrower
//! residual network `g(x)` that learns the base network's residuals. When
//! adding `g(x)` to the base predictions improves the MSE by more than the
//! adaptation threshold (and the base has itself improved by that much since
//! the last growth), the two networks are fused into one wider network and
//! training continues with a freshly reset residual network.
//!
//! The numeric core ([`linalg`], [`nn`], [`growth`]) is generic over the
//! scalar type through [`Real`]; the crate-root aliases fix it to `f64`,
//! which is what the data pipeline, simulators, learners and experiment
//! runner use.

// Negated comparisons reject NaN along with out-of-range values; index loops
// mirror the math in numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod experiment;
pub mod growth;
pub mod learners;
pub mod linalg;
pub mod nn;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::Rng;
pub use scalar::Real;

/// Dense row-major matrix of `f64`.
pub type Matrix = linalg::Matrix<f64>;
/// Multi-layer perceptron over `f64`.
pub type Mlp = nn::MlpNetwork<f64>;
/// Adam optimizer state over `f64`.
pub type Adam = nn::Adam<f64>;
/// Feature/target pair over `f64`.
pub type Dataset = data::Dataset<f64>;
/// Growth controller over `f64`.
pub type GrowthController = growth::GrowthController<f64>;
