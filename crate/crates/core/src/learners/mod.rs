//! Training regimes that exercise growth: behavior cloning, DAgger and PPO
//! with a growing value network.

mod imitation;
mod ppo;

pub use imitation::{
    behavior_clone, behavior_clone_from_expert, dagger, AggregatedDataset, BcConfig, BetaSchedule,
    DaggerConfig, ImitationOutcome,
};
pub use ppo::{
    clipped_objective, fit_value, gae, ppo_train, GaussianPolicy, PpoConfig, PpoOutcome,
    RolloutBuffer, SurrogateGradients,
};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::nn::MlpNetwork;
use crate::sim::{Environment, Expert};

/// Evaluation seeds used when a config does not list its own.
pub fn standard_eval_seeds(n: usize) -> Vec<u64> {
    (10_000..10_000 + n as u64).collect()
}

/// One episode of observations paired with the expert's action at each.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub episode_return: f64,
}

/// Rolls the expert out from each seed.
pub fn expert_trajectories<E, X>(template: &E, expert: &X, seeds: &[u64]) -> Result<Vec<Trajectory>>
where
    E: Environment + Clone,
    X: Expert<E>,
{
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut env = template.clone();
        let mut obs = env.reset(&mut Rng::new(seed));
        let mut t = Trajectory {
            seed,
            observations: Vec::new(),
            actions: Vec::new(),
            episode_return: 0.0,
        };
        while !env.is_done() {
            let a = expert.act(&env);
            let tr = env.step(&a)?;
            t.observations.push(obs);
            t.actions.push(a);
            t.episode_return += tr.reward;
            obs = tr.next_observation;
        }
        out.push(t);
    }
    Ok(out)
}

/// Stacks trajectories into an (observation, action) regression set.
pub fn trajectories_to_dataset(trajectories: &[Trajectory]) -> Result<Dataset<f64>> {
    let mut x = Matrix::zeros(0, 0);
    let mut y = Matrix::zeros(0, 0);
    for t in trajectories {
        for (o, a) in t.observations.iter().zip(&t.actions) {
            x.push_row(o)?;
            y.push_row(a)?;
        }
    }
    if x.rows() == 0 {
        return Err(Error::invalid("no expert transitions to learn from"));
    }
    Dataset::train(x, y)
}

/// Mean episode return of the deterministic policy `obs -> net(obs)` over `seeds`.
pub fn evaluate_policy<E>(template: &E, net: &MlpNetwork<f64>, seeds: &[u64]) -> Result<f64>
where
    E: Environment + Clone,
{
    if seeds.is_empty() {
        return Err(Error::invalid("no evaluation seeds"));
    }
    let mut total = 0.0;
    for &seed in seeds {
        let mut env = template.clone();
        let mut obs = env.reset(&mut Rng::new(seed));
        while !env.is_done() {
            let a = net.predict(&Matrix::row_vector(&obs)?)?.into_vec();
            let tr = env.step(&a)?;
            total += tr.reward;
            obs = tr.next_observation;
        }
    }
    Ok(total / seeds.len() as f64)
}
