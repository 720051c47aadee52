//! Small built-in environments: an obstacle-navigation world with a scripted
//! expert (imitation learning) and a 2-D point mass (reinforcement learning).

mod nav;
mod point_mass;

pub use nav::{nav_expert, Circle, NavConfig, NavExpert, NavWorld, Outcome};
pub use point_mass::{PointMassConfig, PointMassEnv, PointMassExpert};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub done: bool,
}

/// Episodic environment with continuous observations and actions.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Starts a new episode and returns its first observation.
    fn reset(&mut self, rng: &mut Rng) -> Vec<f64>;
    /// Advances one step. Stepping a finished episode is a contract violation.
    fn step(&mut self, action: &[f64]) -> Result<Transition>;
    fn observation(&self) -> Vec<f64>;
    fn is_done(&self) -> bool;
    /// True when the episode ended only because it ran out of time, so the
    /// final state still has a future worth bootstrapping from.
    fn is_truncated(&self) -> bool {
        false
    }
}

/// Scripted policy with access to the full environment state.
pub trait Expert<E> {
    fn act(&self, env: &E) -> Vec<f64>;
}

pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

pub(crate) fn check_action(action: &[f64], dim: usize) -> Result<()> {
    if action.len() != dim {
        return Err(Error::invalid(format!(
            "action has {} components, expected {dim}",
            action.len()
        )));
    }
    Ok(())
}

/// Writes one JSON object per transition.
pub fn write_trace<W: Write>(mut out: W, trace: &[Transition]) -> Result<()> {
    for t in trace {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
    }
    Ok(())
}
