//! Fully connected networks with manual backpropagation, inverted dropout and Adam.

mod adam;
mod backprop;
mod checkpoint;
mod network;
mod train;

pub use adam::{Adam, AdamConfig};
pub use backprop::{ForwardCache, Gradients, LayerGradient, Mode};
pub use checkpoint::{Checkpoint, LayerRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{Activation, Layer, LayerSpec, MlpConfig, MlpNetwork};
pub use train::{evaluate_mse, mse, mse_gradient, train_epoch, EpochOutcome};
