//! 2-D double integrator reaching for a target.
//!
//! Observation: `(target - position) / bound` (2 values) and
//! `velocity / max_speed` (2 values). Action: acceleration, clamped to
//! `[-1, 1]²`. Per-step reward `-‖position - target‖ · dt`, plus
//! `terminal_bonus` when the target disk is reached.

use serde::{Deserialize, Serialize};

use super::{check_action, clamp_unit, Environment, Expert, Transition};
use crate::error::{Error, Result};
use crate::linalg::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointMassConfig {
    /// Positions live in `[-bound, bound]²`.
    pub bound: f64,
    pub dt: f64,
    pub horizon: usize,
    pub capture_radius: f64,
    pub terminal_bonus: f64,
    /// Per-axis speed limit.
    pub max_speed: f64,
    /// Start and target are drawn from `[-spawn, spawn]²`.
    pub spawn: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        Self {
            bound: 5.0,
            dt: 0.1,
            horizon: 200,
            capture_radius: 0.25,
            terminal_bonus: 1.0,
            max_speed: 3.0,
            spawn: 4.0,
        }
    }
}

impl PointMassConfig {
    /// Diagonal of the bounding square.
    pub fn diagonal(&self) -> f64 {
        2.0 * self.bound * std::f64::consts::SQRT_2
    }
}

#[derive(Debug, Clone)]
pub struct PointMassEnv {
    config: PointMassConfig,
    position: [f64; 2],
    velocity: [f64; 2],
    target: [f64; 2],
    steps: usize,
    reached: bool,
}

impl PointMassEnv {
    pub fn new(config: PointMassConfig) -> Self {
        Self {
            config,
            position: [0.0; 2],
            velocity: [0.0; 2],
            target: [0.0; 2],
            steps: 0,
            reached: false,
        }
    }

    pub fn with_state(
        config: PointMassConfig,
        position: [f64; 2],
        velocity: [f64; 2],
        target: [f64; 2],
    ) -> Self {
        let mut env = Self::new(config);
        env.position = position;
        env.velocity = velocity;
        env.target = target;
        env
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.config
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }

    pub fn velocity(&self) -> [f64; 2] {
        self.velocity
    }

    pub fn target(&self) -> [f64; 2] {
        self.target
    }

    pub fn distance(&self) -> f64 {
        (self.position[0] - self.target[0]).hypot(self.position[1] - self.target[1])
    }
}

impl Environment for PointMassEnv {
    fn observation_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        let s = self.config.spawn;
        self.position = [rng.uniform_range(-s, s), rng.uniform_range(-s, s)];
        self.target = [rng.uniform_range(-s, s), rng.uniform_range(-s, s)];
        self.velocity = [0.0; 2];
        self.steps = 0;
        self.reached = false;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        check_action(action, 2)?;
        if self.is_done() {
            return Err(Error::contract("step called on a finished episode"));
        }
        let observation = self.observation();
        let a = [clamp_unit(action[0]), clamp_unit(action[1])];
        let c = &self.config;
        let dt = c.dt;
        for i in 0..2 {
            // exact integration of constant acceleration over one step
            let mut p = self.position[i] + self.velocity[i] * dt + 0.5 * a[i] * dt * dt;
            let mut v = (self.velocity[i] + a[i] * dt).clamp(-c.max_speed, c.max_speed);
            if p.abs() > c.bound {
                p = p.clamp(-c.bound, c.bound);
                v = 0.0;
            }
            self.position[i] = p;
            self.velocity[i] = v;
        }
        self.steps += 1;
        let d = self.distance();
        let mut reward = -d * dt;
        if d <= c.capture_radius {
            self.reached = true;
            reward += c.terminal_bonus;
        }
        Ok(Transition {
            observation,
            action: a.to_vec(),
            reward,
            next_observation: self.observation(),
            done: self.is_done(),
        })
    }

    fn observation(&self) -> Vec<f64> {
        let b = self.config.bound;
        let v = self.config.max_speed;
        vec![
            (self.target[0] - self.position[0]) / b,
            (self.target[1] - self.position[1]) / b,
            self.velocity[0] / v,
            self.velocity[1] / v,
        ]
    }

    fn is_done(&self) -> bool {
        self.reached || self.steps >= self.config.horizon
    }

    fn is_truncated(&self) -> bool {
        !self.reached && self.steps >= self.config.horizon
    }
}

/// PD controller toward the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMassExpert {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PointMassExpert {
    fn default() -> Self {
        Self { kp: 1.5, kd: 2.0 }
    }
}

impl Expert<PointMassEnv> for PointMassExpert {
    fn act(&self, env: &PointMassEnv) -> Vec<f64> {
        (0..2)
            .map(|i| {
                clamp_unit(self.kp * (env.target[i] - env.position[i]) - self.kd * env.velocity[i])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_action_from_rest_stays_put() {
        let cfg = PointMassConfig::default();
        let mut env = PointMassEnv::with_state(cfg.clone(), [1.0, -2.0], [0.0, 0.0], [3.0, 3.0]);
        let t = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(env.position(), [1.0, -2.0]);
        assert!(t.reward < 0.0);

        let mut at = PointMassEnv::with_state(cfg, [3.0, 3.0], [0.0, 0.0], [3.0, 3.0]);
        let t = at.step(&[0.0, 0.0]).unwrap();
        assert!(t.reward >= 0.0);
        assert!(t.done);
    }

    #[test]
    fn bang_bang_matches_closed_form() {
        // accelerate +1 on x for 10 steps, then -1 for 10 steps, from rest
        let cfg = PointMassConfig {
            capture_radius: 0.0,
            ..Default::default()
        };
        let mut env = PointMassEnv::with_state(cfg.clone(), [-2.0, 0.5], [0.0, 0.0], [4.0, 4.0]);
        let dt = cfg.dt;
        let switch = 10.0 * dt;
        for k in 1..=20 {
            let a = if k <= 10 { 1.0 } else { -1.0 };
            env.step(&[a, 0.0]).unwrap();
            let t = k as f64 * dt;
            let (x, v) = if t <= switch + 1e-12 {
                (-2.0 + 0.5 * t * t, t)
            } else {
                let s = t - switch;
                (
                    -2.0 + 0.5 * switch * switch + switch * s - 0.5 * s * s,
                    switch - s,
                )
            };
            assert!((env.position()[0] - x).abs() < 1e-9, "step {k}");
            assert!((env.velocity()[0] - v).abs() < 1e-9);
            assert_eq!(env.position()[1], 0.5);
        }
    }

    #[test]
    fn return_bounded_below() {
        let cfg = PointMassConfig::default();
        let floor = -(cfg.horizon as f64) * cfg.dt * cfg.diagonal();
        let mut rng = Rng::new(1);
        for _ in 0..10 {
            let mut env = PointMassEnv::new(cfg.clone());
            env.reset(&mut rng);
            let mut ret = 0.0;
            while !env.is_done() {
                let a = [rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0)];
                ret += env.step(&a).unwrap().reward;
            }
            assert!(ret >= floor);
        }
    }

    #[test]
    fn deterministic_given_seed_and_actions() {
        let run = || {
            let mut rng = Rng::new(5);
            let mut env = PointMassEnv::new(PointMassConfig::default());
            env.reset(&mut rng);
            let mut out = Vec::new();
            while !env.is_done() {
                let a = [rng.normal(), rng.normal()];
                out.push(env.step(&a).unwrap());
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn expert_reaches_target() {
        let mut rng = Rng::new(3);
        let e = PointMassExpert::default();
        let mut hits = 0;
        for _ in 0..20 {
            let mut env = PointMassEnv::new(PointMassConfig::default());
            env.reset(&mut rng);
            while !env.is_done() {
                let a = e.act(&env);
                env.step(&a).unwrap();
            }
            hits += usize::from(env.distance() <= env.config().capture_radius);
        }
        assert!(hits >= 18, "{hits}");
    }

    #[test]
    fn step_after_done_is_contract_error() {
        let cfg = PointMassConfig {
            horizon: 1,
            ..Default::default()
        };
        let mut env = PointMassEnv::with_state(cfg, [0.0; 2], [0.0; 2], [2.0, 2.0]);
        env.step(&[0.0, 0.0]).unwrap();
        assert!(matches!(env.step(&[0.0, 0.0]), Err(Error::Contract(_))));
    }
}
