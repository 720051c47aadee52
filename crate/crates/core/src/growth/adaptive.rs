use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::linalg::Rng;
use crate::nn::{evaluate_mse, train_epoch, Adam, AdamConfig, MlpNetwork};
use crate::scalar::Real;

use super::{GrowthConfig, GrowthController, GrowthEvent};

/// One row of a run's metric stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Base hidden widths at the end of the epoch (after any growth).
    pub widths: Vec<usize>,
    /// Eval-mode MSE on the training set after the epoch's updates (equals α when growing).
    pub train_mse: f64,
    pub holdout_mse: Option<f64>,
    /// Accuracy, environment score or return, depending on the task.
    pub score: Option<f64>,
    pub grew: bool,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub alpha_prev: Option<f64>,
}

/// A base network with its optimizer and, when growing, its growth controller.
#[derive(Debug, Clone)]
pub struct AdaptiveNet<T> {
    net: MlpNetwork<T>,
    opt: Adam<T>,
    growth: Option<GrowthController<T>>,
    batch_size: usize,
    epochs: usize,
}

impl<T: Real> AdaptiveNet<T> {
    pub fn new(
        net: MlpNetwork<T>,
        optimizer: AdamConfig,
        growth: Option<GrowthConfig>,
        batch_size: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let growth = growth
            .map(|cfg| GrowthController::new(&net, cfg, rng))
            .transpose()?;
        Ok(Self {
            opt: Adam::new(&net, optimizer),
            net,
            growth,
            batch_size,
            epochs: 0,
        })
    }

    pub fn net(&self) -> &MlpNetwork<T> {
        &self.net
    }

    pub fn widths(&self) -> Vec<usize> {
        self.net.hidden_widths()
    }

    pub fn growth(&self) -> Option<&GrowthController<T>> {
        self.growth.as_ref()
    }

    pub fn is_growing(&self) -> bool {
        self.growth.is_some()
    }

    pub fn history(&self) -> &[GrowthEvent] {
        self.growth.as_ref().map_or(&[], |g| g.history())
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    /// One epoch: a growth step when growing, a plain training epoch otherwise.
    pub fn epoch(&mut self, data: &Dataset<T>, rng: &mut Rng) -> Result<EpochRecord> {
        let epoch = self.epochs;
        self.epochs += 1;
        match &mut self.growth {
            Some(ctrl) => {
                let rep = ctrl.sann_step(
                    epoch,
                    &mut self.net,
                    &mut self.opt,
                    data,
                    rng,
                    self.batch_size,
                )?;
                Ok(EpochRecord {
                    epoch,
                    widths: rep.widths_after,
                    train_mse: rep.decision.alpha.as_f64(),
                    holdout_mse: None,
                    score: None,
                    grew: rep.grew,
                    alpha: Some(rep.decision.alpha.as_f64()),
                    beta: Some(rep.decision.beta.as_f64()),
                    alpha_prev: Some(rep.alpha_prev.as_f64()),
                })
            }
            None => {
                let out = train_epoch(&mut self.net, data, &mut self.opt, rng, self.batch_size)?;
                let n = out.residuals.as_slice().len().max(1) as f64;
                let train_mse = out
                    .residuals
                    .as_slice()
                    .iter()
                    .map(|r| r.as_f64().powi(2))
                    .sum::<f64>()
                    / n;
                Ok(EpochRecord {
                    epoch,
                    widths: self.net.hidden_widths(),
                    train_mse,
                    holdout_mse: None,
                    score: None,
                    grew: false,
                    alpha: None,
                    beta: None,
                    alpha_prev: None,
                })
            }
        }
    }

    /// Plain training epoch that never consults the growth controller.
    pub fn train_only(&mut self, data: &Dataset<T>, rng: &mut Rng) -> Result<T> {
        Ok(train_epoch(&mut self.net, data, &mut self.opt, rng, self.batch_size)?.mean_loss)
    }

    pub fn evaluate(&self, data: &Dataset<T>) -> Result<T> {
        evaluate_mse(&self.net, data)
    }
}
