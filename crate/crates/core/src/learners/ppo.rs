//! PPO-clip with GAE, a Gaussian policy of fixed width and a (possibly
//! growing) value network.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::growth::{AdaptiveNet, EpochRecord};
use crate::linalg::{Matrix, Rng};
use crate::nn::{Activation, Adam, AdamConfig, Gradients, MlpConfig, MlpNetwork, Mode};
use crate::sim::Environment;

use super::{evaluate_policy, standard_eval_seeds};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// The policy's output layer is scaled by this at init so the initial mean
/// action is near zero, inside the environment's action clamp.
const POLICY_HEAD_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub rollout_steps: usize,
    pub minibatch_size: usize,
    pub ppo_epochs: usize,
    /// Passes over the rollout when fitting the value net; growth is
    /// considered on the last one.
    pub value_epochs: usize,
    pub policy_widths: Vec<usize>,
    pub entropy_coef: f64,
    pub policy_optimizer: AdamConfig,
    pub initial_log_std: f64,
    /// Rewards are multiplied by this before advantages and value targets
    /// are computed, keeping returns near unit scale. Reported scores use
    /// raw rewards.
    pub reward_scale: f64,
    pub total_steps: usize,
    pub eval_seeds: Vec<u64>,
    /// Abort when the mean |V(s)| over a rollout exceeds this.
    pub value_limit: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            rollout_steps: 512,
            minibatch_size: 64,
            ppo_epochs: 10,
            value_epochs: 10,
            policy_widths: vec![64, 64],
            entropy_coef: 0.0,
            policy_optimizer: AdamConfig::default().with_learning_rate(1e-3),
            initial_log_std: -0.5,
            reward_scale: 0.05,
            total_steps: 100_000,
            eval_seeds: standard_eval_seeds(5),
            value_limit: 1e6,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            errs.push(format!(
                "clip_epsilon must be in (0, 1), got {}",
                self.clip_epsilon
            ));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            errs.push(format!("discount must be in (0, 1], got {}", self.discount));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            errs.push(format!(
                "gae_lambda must be in [0, 1], got {}",
                self.gae_lambda
            ));
        }
        for (name, v) in [
            ("rollout_steps", self.rollout_steps),
            ("minibatch_size", self.minibatch_size),
            ("ppo_epochs", self.ppo_epochs),
            ("value_epochs", self.value_epochs),
        ] {
            if v == 0 {
                errs.push(format!("{name} must be >= 1"));
            }
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            errs.push(format!(
                "reward_scale must be positive and finite, got {}",
                self.reward_scale
            ));
        }
        if self.eval_seeds.is_empty() {
            errs.push("eval_seeds must not be empty".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// `min(r·A, clip(r, 1-ε, 1+ε)·A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage)
}

/// d clipped_objective / d log π(a|s) at the given ratio: `r·A` on the
/// unclipped branch, zero where clipping is active.
fn objective_slope(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    if ratio * advantage <= clipped {
        ratio * advantage
    } else {
        0.0
    }
}

/// Generalized advantage estimation. `values[t] = V(s_t)`; `last_value` is
/// `V` of the state after the final step (ignored if that step was terminal).
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    discount: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::invalid("gae inputs must have equal lengths"));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let delta = rewards[t] + discount * next_value * live - values[t];
        next_adv = delta + discount * lambda * live * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Plain Adam over a parameter vector (the policy's log-stddev).
#[derive(Debug, Clone)]
struct VecAdam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl VecAdam {
    fn new(n: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        let c = self.config;
        self.t += 1;
        let b1 = 1.0 - c.beta1.powi(self.t);
        let b2 = 1.0 - c.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grads[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
            params[i] -= c.learning_rate * (self.m[i] / b1) / ((self.v[i] / b2).sqrt() + c.epsilon);
        }
    }
}

/// Diagonal Gaussian policy: the mean comes from a tanh MLP, the
/// log-stddev is a state-independent learned vector.
#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    net: MlpNetwork<f64>,
    log_std: Vec<f64>,
    net_opt: Adam<f64>,
    std_opt: VecAdam,
}

/// Gradients of the PPO loss `-(mean clipped objective) - c·entropy`.
#[derive(Debug, Clone)]
pub struct SurrogateGradients {
    /// Mean clipped objective over the batch.
    pub objective: f64,
    /// Per-sample clipped objective terms.
    pub terms: Vec<f64>,
    pub clip_fraction: f64,
    pub net: Gradients<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(
        observation_dim: usize,
        action_dim: usize,
        widths: &[usize],
        initial_log_std: f64,
        optimizer: AdamConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        let cfg =
            MlpConfig::new(observation_dim, widths, action_dim).hidden_activation(Activation::Tanh);
        let mut net = MlpNetwork::init(&cfg, rng)?;
        if let Some(head) = net.layers_mut().last_mut() {
            head.weights
                .as_mut_slice()
                .iter_mut()
                .for_each(|w| *w *= POLICY_HEAD_SCALE);
            head.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        Ok(Self {
            net_opt: Adam::new(&net, optimizer),
            std_opt: VecAdam::new(action_dim, optimizer),
            log_std: vec![initial_log_std; action_dim],
            net,
        })
    }

    pub fn net(&self) -> &MlpNetwork<f64> {
        &self.net
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn widths(&self) -> Vec<usize> {
        self.net.hidden_widths()
    }

    pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(log_std)
            .zip(action)
            .map(|((&mu, &ls), &a)| {
                let z = (a - mu) / ls.exp();
                -0.5 * z * z - ls - 0.5 * LN_2PI
            })
            .sum()
    }

    /// Draws an action; returns it with its log-probability.
    pub fn sample(&self, observation: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let mean = self
            .net
            .predict(&Matrix::row_vector(observation)?)?
            .into_vec();
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(mu, ls)| mu + ls.exp() * rng.normal())
            .collect();
        let lp = Self::log_prob(&mean, &self.log_std, &action);
        Ok((action, lp))
    }

    pub fn surrogate(
        &self,
        observations: &Matrix<f64>,
        actions: &Matrix<f64>,
        old_log_probs: &[f64],
        advantages: &[f64],
        epsilon: f64,
        entropy_coef: f64,
    ) -> Result<SurrogateGradients> {
        let m = observations.rows();
        if actions.rows() != m || old_log_probs.len() != m || advantages.len() != m || m == 0 {
            return Err(Error::invalid(
                "surrogate batch components disagree in length",
            ));
        }
        let cache = self.net.forward(observations, Mode::Eval)?;
        let mean = cache.output();
        let k = self.log_std.len();
        let var: Vec<f64> = self.log_std.iter().map(|ls| (2.0 * ls).exp()).collect();
        let mut dmean = Matrix::zeros(m, k);
        let mut dlog_std = vec![-entropy_coef; k];
        let mut terms = Vec::with_capacity(m);
        let mut clipped = 0;
        let inv_m = 1.0 / m as f64;
        for i in 0..m {
            let mu = mean.row(i);
            let a = actions.row(i);
            let lp = Self::log_prob(mu, &self.log_std, a);
            let ratio = (lp - old_log_probs[i]).exp();
            let adv = advantages[i];
            terms.push(clipped_objective(ratio, adv, epsilon));
            let slope = objective_slope(ratio, adv, epsilon);
            if slope == 0.0 && adv != 0.0 {
                clipped += 1;
            }
            for j in 0..k {
                let d = a[j] - mu[j];
                dmean.set(i, j, -inv_m * slope * d / var[j]);
                dlog_std[j] -= inv_m * slope * (d * d / var[j] - 1.0);
            }
        }
        let net = self.net.backward(&cache, &dmean)?;
        Ok(SurrogateGradients {
            objective: terms.iter().sum::<f64>() * inv_m,
            terms,
            clip_fraction: clipped as f64 * inv_m,
            net,
            log_std: dlog_std,
        })
    }

    fn apply(&mut self, grads: &SurrogateGradients) -> Result<()> {
        self.net_opt.step(&mut self.net, &grads.net)?;
        self.std_opt.step(&mut self.log_std, &grads.log_std);
        Ok(())
    }
}

/// On-policy experience of one rollout.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Returns of episodes that finished during the rollout.
    pub episode_returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Computes advantages and returns with GAE.
    pub fn finish(&mut self, last_value: f64, discount: f64, lambda: f64) -> Result<()> {
        let (adv, ret) = gae(
            &self.rewards,
            &self.values,
            &self.dones,
            last_value,
            discount,
            lambda,
        )?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    /// Zero mean, unit variance; all zeros if the advantages are constant.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len();
        if n == 0 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n as f64;
        let var = self
            .advantages
            .iter()
            .map(|a| (a - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let sd = var.sqrt();
        for a in &mut self.advantages {
            *a -= mean;
            if sd > 1e-8 {
                *a /= sd;
            }
        }
    }

    pub fn observation_matrix(&self) -> Result<Matrix<f64>> {
        Matrix::from_rows(&self.observations)
    }
}

#[derive(Debug, Clone)]
pub struct PpoOutcome {
    /// One record per update; `widths` are the value-net widths and `score`
    /// the deterministic policy's mean return on the evaluation seeds.
    pub records: Vec<EpochRecord>,
    /// Policy widths after each update.
    pub policy_widths: Vec<Vec<usize>>,
}

/// Fits the value net to `(observations, returns)`: `epochs - 1` plain passes,
/// then one pass that is a growth step when the model is growing.
pub fn fit_value(
    value: &mut AdaptiveNet<f64>,
    observations: &Matrix<f64>,
    returns: &[f64],
    epochs: usize,
    rng: &mut Rng,
) -> Result<EpochRecord> {
    let data = Dataset::train(
        observations.clone(),
        Matrix::from_vec(returns.len(), 1, returns.to_vec())?,
    )?;
    for _ in 1..epochs {
        value.train_only(&data, rng)?;
    }
    value.epoch(&data, rng)
}

struct Runner<E> {
    env: E,
    obs: Vec<f64>,
    episode_return: f64,
}

fn collect<E: Environment>(
    runner: &mut Runner<E>,
    policy: &GaussianPolicy,
    value: &MlpNetwork<f64>,
    steps: usize,
    reward_scale: f64,
    discount: f64,
    rng: &mut Rng,
) -> Result<(RolloutBuffer, f64)> {
    let mut buf = RolloutBuffer::default();
    for _ in 0..steps {
        if runner.env.is_done() {
            runner.obs = runner.env.reset(&mut Rng::new(rng.next_u64()));
            runner.episode_return = 0.0;
        }
        let (action, lp) = policy.sample(&runner.obs, rng)?;
        let v = value.predict(&Matrix::row_vector(&runner.obs)?)?.get(0, 0);
        let tr = runner.env.step(&action)?;
        runner.episode_return += tr.reward;
        buf.observations
            .push(std::mem::replace(&mut runner.obs, tr.next_observation));
        buf.actions.push(action);
        buf.log_probs.push(lp);
        let mut reward = tr.reward * reward_scale;
        if runner.env.is_truncated() {
            // running out of time is not a terminal state: fold the value of
            // the state reached into the last reward
            reward += discount * value.predict(&Matrix::row_vector(&runner.obs)?)?.get(0, 0);
        }
        buf.rewards.push(reward);
        buf.values.push(v);
        buf.dones.push(tr.done);
        if tr.done {
            buf.episode_returns.push(runner.episode_return);
        }
    }
    let last = if runner.env.is_done() {
        0.0
    } else {
        value.predict(&Matrix::row_vector(&runner.obs)?)?.get(0, 0)
    };
    Ok((buf, last))
}

/// PPO on `template`. Each update collects `rollout_steps` transitions,
/// fits the value net to the empirical returns (growth is decided on that
/// rollout only), then runs `ppo_epochs` of clipped-surrogate minibatch
/// ascent on the policy. The policy never changes shape.
pub fn ppo_train<E>(
    policy: &mut GaussianPolicy,
    value: &mut AdaptiveNet<f64>,
    template: &E,
    config: &PpoConfig,
    rng: &mut Rng,
) -> Result<PpoOutcome>
where
    E: Environment + Clone,
{
    config.validate()?;
    let mut env = template.clone();
    let obs = env.reset(&mut Rng::new(rng.next_u64()));
    let mut runner = Runner {
        env,
        obs,
        episode_return: 0.0,
    };
    let updates = config.total_steps.div_ceil(config.rollout_steps);
    let mut out = PpoOutcome {
        records: Vec::with_capacity(updates),
        policy_widths: Vec::with_capacity(updates),
    };
    for update in 0..updates {
        let (mut buf, last) = collect(
            &mut runner,
            policy,
            value.net(),
            config.rollout_steps,
            config.reward_scale,
            config.discount,
            rng,
        )?;
        let mean_abs_value = buf.values.iter().map(|v| v.abs()).sum::<f64>() / buf.len() as f64;
        if !(mean_abs_value <= config.value_limit) {
            return Err(Error::Divergence(format!(
                "mean |V| = {mean_abs_value:e} exceeds {:e} at update {update}",
                config.value_limit
            )));
        }
        buf.finish(last, config.discount, config.gae_lambda)?;
        buf.normalize_advantages();
        let obs = buf.observation_matrix()?;
        let actions = Matrix::from_rows(&buf.actions)?;

        for _ in 0..config.ppo_epochs {
            let order = rng.permutation(buf.len());
            for chunk in order.chunks(config.minibatch_size) {
                let lp: Vec<f64> = chunk.iter().map(|&i| buf.log_probs[i]).collect();
                let adv: Vec<f64> = chunk.iter().map(|&i| buf.advantages[i]).collect();
                let g = policy.surrogate(
                    &obs.select_rows(chunk),
                    &actions.select_rows(chunk),
                    &lp,
                    &adv,
                    config.clip_epsilon,
                    config.entropy_coef,
                )?;
                policy.apply(&g)?;
            }
        }

        let mut rec = fit_value(value, &obs, &buf.returns, config.value_epochs, rng)?;
        rec.epoch = update;
        rec.score = Some(evaluate_policy(template, policy.net(), &config.eval_seeds)?);
        out.records.push(rec);
        out.policy_widths.push(policy.widths());
    }
    Ok(out)
}
