use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::growth::{AdaptiveNet, EpochRecord};
use crate::linalg::{Matrix, Rng};
use crate::nn::{evaluate_mse, MlpNetwork};
use crate::sim::{Environment, Expert};

use super::{evaluate_policy, expert_trajectories, standard_eval_seeds, trajectories_to_dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub train_trajectories: usize,
    pub validation_trajectories: usize,
    pub epochs: usize,
    /// Environment seeds for the per-epoch score; disjoint from the trajectory seeds.
    pub eval_seeds: Vec<u64>,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            train_trajectories: 10,
            validation_trajectories: 10,
            epochs: 100,
            eval_seeds: standard_eval_seeds(10),
        }
    }
}

/// Supervised action regression. Each epoch is a growth step when `model`
/// carries a controller. `holdout_mse` is the validation MSE; `score` is
/// whatever `scorer` reports for the current network.
pub fn behavior_clone<S>(
    model: &mut AdaptiveNet<f64>,
    train: &Dataset<f64>,
    validation: &Dataset<f64>,
    epochs: usize,
    mut scorer: S,
    rng: &mut Rng,
) -> Result<Vec<EpochRecord>>
where
    S: FnMut(&MlpNetwork<f64>) -> Result<Option<f64>>,
{
    if train.is_empty() || validation.is_empty() {
        return Err(Error::invalid(
            "behavior cloning needs non-empty train and validation sets",
        ));
    }
    let mut records = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let mut rec = model.epoch(train, rng)?;
        rec.holdout_mse = Some(evaluate_mse(model.net(), validation)?);
        rec.score = scorer(model.net())?;
        records.push(rec);
    }
    Ok(records)
}

/// Behavior cloning from freshly generated expert trajectories, scored in
/// `template` on `config.eval_seeds`.
pub fn behavior_clone_from_expert<E, X>(
    model: &mut AdaptiveNet<f64>,
    template: &E,
    expert: &X,
    config: &BcConfig,
    rng: &mut Rng,
) -> Result<Vec<EpochRecord>>
where
    E: Environment + Clone,
    X: Expert<E>,
{
    let train_seeds: Vec<u64> = (0..config.train_trajectories)
        .map(|_| rng.next_u64())
        .collect();
    let val_seeds: Vec<u64> = (0..config.validation_trajectories)
        .map(|_| rng.next_u64())
        .collect();
    let train = trajectories_to_dataset(&expert_trajectories(template, expert, &train_seeds)?)?;
    let validation = trajectories_to_dataset(&expert_trajectories(template, expert, &val_seeds)?)?;
    let validation = Dataset::new(
        validation.features().clone(),
        validation.targets().clone(),
        Split::Holdout,
    )?;
    let seeds = config.eval_seeds.clone();
    behavior_clone(
        model,
        &train,
        &validation,
        config.epochs,
        |net| evaluate_policy(template, net, &seeds).map(Some),
        rng,
    )
}

/// Probability of executing the expert's action at DAgger iteration `i` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum BetaSchedule {
    /// Expert on the first iteration only.
    #[default]
    FirstIteration,
    Constant {
        beta: f64,
    },
    /// `decay^(i-1)`.
    Geometric {
        decay: f64,
    },
}


impl BetaSchedule {
    pub fn beta(self, iteration: usize) -> f64 {
        match self {
            Self::FirstIteration => f64::from(u8::from(iteration == 1)),
            Self::Constant { beta } => beta,
            Self::Geometric { decay } => decay.powi(iteration.saturating_sub(1) as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaggerConfig {
    pub iterations: usize,
    pub episodes_per_iter: usize,
    /// Training epochs over the aggregate after each collection round.
    pub epochs_per_iter: usize,
    pub beta: BetaSchedule,
    pub eval_seeds: Vec<u64>,
}

impl Default for DaggerConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            episodes_per_iter: 20,
            epochs_per_iter: 20,
            beta: BetaSchedule::default(),
            eval_seeds: standard_eval_seeds(100),
        }
    }
}

/// Append-only store of (observation, expert action) pairs.
#[derive(Debug, Clone)]
pub struct AggregatedDataset {
    data: Dataset<f64>,
}

impl Default for AggregatedDataset {
    fn default() -> Self {
        Self::new()
    }
}

impl AggregatedDataset {
    pub fn new() -> Self {
        Self {
            data: Dataset::train(Matrix::zeros(0, 0), Matrix::zeros(0, 0)).expect("empty dataset"),
        }
    }

    pub fn push(&mut self, observation: &[f64], expert_action: &[f64]) -> Result<()> {
        self.data.append(observation, expert_action)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dataset(&self) -> &Dataset<f64> {
        &self.data
    }
}

#[derive(Debug, Clone)]
pub struct ImitationOutcome {
    /// One record per iteration: the last training epoch's metrics plus the
    /// held-out score. `grew` is true if any epoch of the iteration grew.
    pub records: Vec<EpochRecord>,
    /// Aggregate size after each iteration.
    pub dataset_sizes: Vec<usize>,
    /// Episode seeds used for collection, per iteration.
    pub episode_seeds: Vec<Vec<u64>>,
    pub dataset: AggregatedDataset,
}

/// DAgger: at iteration `i` roll out the β_i mixture of expert and learner,
/// label every visited state with the expert's action, aggregate, retrain on
/// the whole aggregate, then score the learner on `config.eval_seeds`.
pub fn dagger<E, X>(
    model: &mut AdaptiveNet<f64>,
    template: &E,
    expert: &X,
    config: &DaggerConfig,
    rng: &mut Rng,
) -> Result<ImitationOutcome>
where
    E: Environment + Clone,
    X: Expert<E>,
{
    if config.episodes_per_iter == 0 || config.epochs_per_iter == 0 {
        return Err(Error::invalid(
            "dagger needs at least one episode and one epoch per iteration",
        ));
    }
    let mut agg = AggregatedDataset::new();
    let mut out = ImitationOutcome {
        records: Vec::with_capacity(config.iterations),
        dataset_sizes: Vec::with_capacity(config.iterations),
        episode_seeds: Vec::with_capacity(config.iterations),
        dataset: AggregatedDataset::new(),
    };
    for i in 1..=config.iterations {
        let beta = config.beta.beta(i);
        let seeds: Vec<u64> = (0..config.episodes_per_iter)
            .map(|_| rng.next_u64())
            .collect();
        for &seed in &seeds {
            let mut env = template.clone();
            let mut obs = env.reset(&mut Rng::new(seed));
            while !env.is_done() {
                let label = expert.act(&env);
                let use_expert = if beta >= 1.0 {
                    true
                } else if beta <= 0.0 {
                    false
                } else {
                    rng.bernoulli(beta)
                };
                let action = if use_expert {
                    label.clone()
                } else {
                    model.net().predict(&Matrix::row_vector(&obs)?)?.into_vec()
                };
                agg.push(&obs, &label)?;
                obs = env.step(&action)?.next_observation;
            }
        }
        let mut grew = false;
        let mut last = None;
        for _ in 0..config.epochs_per_iter {
            let rec = model.epoch(agg.dataset(), rng)?;
            grew |= rec.grew;
            last = Some(rec);
        }
        let mut rec = last.expect("epochs_per_iter >= 1");
        rec.epoch = i;
        rec.grew = grew;
        rec.score = Some(evaluate_policy(template, model.net(), &config.eval_seeds)?);
        out.records.push(rec);
        out.dataset_sizes.push(agg.len());
        out.episode_seeds.push(seeds);
    }
    out.dataset = agg;
    Ok(out)
}
