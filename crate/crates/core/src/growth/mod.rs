//! When and how to grow.
//!
//! After every base-network epoch a narrower residual network `g(x)` is fit
//! to the base residuals `r_i = y_i - f(x_i)`. With `α = MSE(f)` and
//! `β = MSE(f + g)` on the training set, the base grows iff
//!
//! ```text
//! β / α < 1 - γ   and   α / α_prev < 1 - γ
//! ```
//!
//! where `α_prev` is `α` at the previous growth event. Growth fuses `g` into
//! `f` (see [`fuse`]) and resets `g` to a fresh network of its original width.

mod adaptive;
mod fuse;

pub use adaptive::{AdaptiveNet, EpochRecord};
pub use fuse::fuse;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::nn::{mse, train_epoch, Adam, AdamConfig, MlpConfig, MlpNetwork};
use crate::scalar::Real;

/// Initial `α_prev`: any real first α passes the second clause.
pub const INITIAL_ALPHA_PREV: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthConfig {
    /// Adaptation threshold γ ∈ (0, 1).
    pub gamma: f64,
    /// Cross-block init stddev as a fraction of the residual layer's weight RMS.
    pub cross_init_scale: f64,
    /// Residual hidden widths; `None` derives them from the initial base widths.
    pub residual_widths: Option<Vec<usize>>,
    /// Residual-network epochs per outer epoch.
    pub residual_epochs: usize,
    /// Upper bound on the sum of base hidden widths; growth that would exceed it is skipped.
    pub width_cap: usize,
    pub initial_alpha_prev: f64,
    pub residual_optimizer: AdamConfig,
    /// Dropout on the residual network's hidden layers.
    pub residual_dropout: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            cross_init_scale: 0.1,
            residual_widths: None,
            residual_epochs: 1,
            width_cap: 512,
            initial_alpha_prev: INITIAL_ALPHA_PREV,
            residual_optimizer: AdamConfig::default(),
            residual_dropout: 0.0,
        }
    }
}

impl GrowthConfig {
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            errs.push(format!("gamma must be in (0, 1), got {}", self.gamma));
        }
        if !(self.cross_init_scale >= 0.0) {
            errs.push(format!(
                "cross_init_scale must be >= 0, got {}",
                self.cross_init_scale
            ));
        }
        if !(self.initial_alpha_prev > 0.0) {
            errs.push("initial_alpha_prev must be > 0".into());
        }
        if self.residual_epochs == 0 {
            errs.push("residual_epochs must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.residual_dropout) {
            errs.push("residual_dropout must be in [0, 1)".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Default residual width for a base hidden layer: `ceil(w / 8)`, at least 2,
/// but always strictly narrower than the base layer.
pub fn default_residual_width(base_width: usize) -> usize {
    base_width
        .div_ceil(8)
        .max(2)
        .min(base_width.saturating_sub(1))
}

/// The growth predicate.
pub fn should_grow<T: Real>(alpha: T, beta: T, alpha_prev: T, gamma: T) -> bool {
    let bar = T::ONE - gamma;
    beta / alpha < bar && alpha / alpha_prev < bar
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthDecision<T> {
    /// MSE of the base network alone.
    pub alpha: T,
    /// MSE of base plus residual predictions.
    pub beta: T,
    pub grew: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEvent {
    pub epoch: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `α_prev` in force when the decision was made.
    pub alpha_prev: f64,
    pub widths_before: Vec<usize>,
    pub widths_after: Vec<usize>,
}

/// Outcome of one [`GrowthController::sann_step`].
#[derive(Debug, Clone)]
pub struct StepReport<T> {
    pub train_loss: T,
    pub residual_loss: T,
    pub decision: GrowthDecision<T>,
    /// `α_prev` used for the decision.
    pub alpha_prev: T,
    /// True only if the network actually grew (the predicate held and the width cap allowed it).
    pub grew: bool,
    pub capped: bool,
    pub widths_before: Vec<usize>,
    pub widths_after: Vec<usize>,
}

/// Owns the residual network `g(x)`, its optimizer, `γ` and `α_prev`.
#[derive(Debug, Clone)]
pub struct GrowthController<T> {
    config: GrowthConfig,
    alpha_prev: T,
    residual_config: MlpConfig,
    residual: MlpNetwork<T>,
    residual_opt: Adam<T>,
    history: Vec<GrowthEvent>,
}

impl<T: Real> GrowthController<T> {
    /// Builds the residual network for `base`: same depth, input and output
    /// widths and activations, narrower hidden layers.
    pub fn new(base: &MlpNetwork<T>, config: GrowthConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let base_cfg = base.config();
        if base_cfg.hidden_widths.is_empty() {
            return Err(Error::invalid(
                "growth needs a base network with hidden layers",
            ));
        }
        let widths = match &config.residual_widths {
            Some(w) => w.clone(),
            None => base_cfg
                .hidden_widths
                .iter()
                .map(|&w| default_residual_width(w))
                .collect(),
        };
        if widths.len() != base_cfg.hidden_widths.len() {
            return Err(Error::invalid(format!(
                "residual has {} hidden layers, base has {}",
                widths.len(),
                base_cfg.hidden_widths.len()
            )));
        }
        for (r, b) in widths.iter().zip(&base_cfg.hidden_widths) {
            if *r == 0 || r >= b {
                return Err(Error::invalid(format!(
                    "residual widths {widths:?} must be >= 1 and narrower than base {:?}",
                    base_cfg.hidden_widths
                )));
            }
        }
        let residual_config = MlpConfig {
            hidden_widths: widths,
            dropout_rate: config.residual_dropout,
            ..base_cfg
        };
        let residual = MlpNetwork::init(&residual_config, rng)?;
        let residual_opt = Adam::new(&residual, config.residual_optimizer);
        Ok(Self {
            alpha_prev: T::of(config.initial_alpha_prev),
            config,
            residual_config,
            residual,
            residual_opt,
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &GrowthConfig {
        &self.config
    }

    pub fn gamma(&self) -> T {
        T::of(self.config.gamma)
    }

    pub fn alpha_prev(&self) -> T {
        self.alpha_prev
    }

    pub fn residual(&self) -> &MlpNetwork<T> {
        &self.residual
    }

    pub fn residual_optimizer(&self) -> &Adam<T> {
        &self.residual_opt
    }

    pub fn residual_widths(&self) -> &[usize] {
        &self.residual_config.hidden_widths
    }

    pub fn history(&self) -> &[GrowthEvent] {
        &self.history
    }

    /// Trains `g` on `(inputs, residuals)` for the configured number of
    /// epochs; returns the last epoch's mean loss.
    pub fn fit_residual(
        &mut self,
        inputs: &Matrix<T>,
        residuals: &Matrix<T>,
        rng: &mut Rng,
        batch_size: usize,
    ) -> Result<T> {
        if inputs.rows() != residuals.rows() {
            return Err(Error::invalid(format!(
                "{} inputs but {} residual rows",
                inputs.rows(),
                residuals.rows()
            )));
        }
        let data = Dataset::train(inputs.clone(), residuals.clone())?;
        let mut loss = T::ZERO;
        for _ in 0..self.config.residual_epochs {
            loss = train_epoch(
                &mut self.residual,
                &data,
                &mut self.residual_opt,
                rng,
                batch_size,
            )?
            .mean_loss;
        }
        Ok(loss)
    }

    /// Computes `α`, `β` and the growth predicate. Touches neither network.
    pub fn evaluate_criterion(
        &self,
        base: &MlpNetwork<T>,
        data: &Dataset<T>,
    ) -> Result<GrowthDecision<T>> {
        let f = base.predict(data.features())?;
        let g = self.residual.predict(data.features())?;
        let alpha = mse(&f, data.targets())?;
        let beta = mse(&f.add(&g)?, data.targets())?;
        Ok(GrowthDecision {
            alpha,
            beta,
            grew: should_grow(alpha, beta, self.alpha_prev, self.gamma()),
        })
    }

    /// Fresh residual network of the configured widths with zeroed optimizer
    /// moments; `α_prev ← alpha`.
    pub fn reset_residual(&mut self, alpha: T, rng: &mut Rng) -> Result<()> {
        self.residual = MlpNetwork::init(&self.residual_config, rng)?;
        self.residual_opt = Adam::new(&self.residual, self.config.residual_optimizer);
        self.alpha_prev = alpha;
        Ok(())
    }

    /// One full loop body: train `f`, fit `g` to the residuals, evaluate the
    /// criterion and, if it holds, fuse `g` into `f` (replacing `base` and
    /// re-creating `base_opt`) and reset `g`.
    pub fn sann_step(
        &mut self,
        epoch: usize,
        base: &mut MlpNetwork<T>,
        base_opt: &mut Adam<T>,
        data: &Dataset<T>,
        rng: &mut Rng,
        batch_size: usize,
    ) -> Result<StepReport<T>> {
        let widths_before = base.hidden_widths();
        let outcome = train_epoch(base, data, base_opt, rng, batch_size)?;
        let residual_loss =
            self.fit_residual(data.features(), &outcome.residuals, rng, batch_size)?;
        let decision = self.evaluate_criterion(base, data)?;
        let alpha_prev = self.alpha_prev;

        let grown_total: usize =
            widths_before.iter().sum::<usize>() + self.residual_widths().iter().sum::<usize>();
        let capped = decision.grew && grown_total > self.config.width_cap;
        let grew = decision.grew && !capped;
        if grew {
            let fused = fuse(base, &self.residual, rng, self.config.cross_init_scale)?;
            *base = fused;
            *base_opt = Adam::new(base, *base_opt.config());
            self.reset_residual(decision.alpha, rng)?;
            self.history.push(GrowthEvent {
                epoch,
                alpha: decision.alpha.as_f64(),
                beta: decision.beta.as_f64(),
                alpha_prev: alpha_prev.as_f64(),
                widths_before: widths_before.clone(),
                widths_after: base.hidden_widths(),
            });
        }
        Ok(StepReport {
            train_loss: outcome.mean_loss,
            residual_loss,
            decision,
            alpha_prev,
            grew,
            capped,
            widths_after: base.hidden_widths(),
            widths_before,
        })
    }
}
