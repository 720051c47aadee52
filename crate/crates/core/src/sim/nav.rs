//! Obstacle-navigation world.
//!
//! A unicycle agent drives at a throttle-modulated speed through a
//! rectangular arena with circular obstacles toward a goal disk.
//!
//! Observation (`3 + rays` values):
//! * `cos`, `sin` of the goal bearing relative to the heading, in `[-1, 1]`
//! * goal distance divided by the arena diagonal, in `[0, 1]`
//! * `rays` obstacle distances along a fan of `ray_fov` radians centered on
//!   the heading (default ±90°), divided by the ray range and capped at 1
//!
//! Action: `(turn_rate, throttle)`, each clamped to `[-1, 1]`.
//!
//! Score/return: +1 on reaching the goal, -1 on collision, 0 on timeout,
//! minus 0.001 per step.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_action, clamp_unit, Environment, Expert, Transition};
use crate::error::{Error, Result};
use crate::linalg::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavConfig {
    pub width: f64,
    pub height: f64,
    pub obstacles: usize,
    pub min_obstacle_radius: f64,
    pub max_obstacle_radius: f64,
    pub capture_radius: f64,
    pub agent_radius: f64,
    /// Speed at zero throttle; throttle scales it by `1 + 0.5 * throttle`.
    pub speed: f64,
    /// Turn rate at `turn_rate = ±1`, radians per second.
    pub max_turn_rate: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub rays: usize,
    pub ray_range: f64,
    /// Angular span of the ray fan, centered on the heading. A full turn
    /// (2π) spaces the rays evenly around the agent.
    pub ray_fov: f64,
    pub min_start_goal_distance: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            width: 10.0,
            height: 10.0,
            obstacles: 5,
            min_obstacle_radius: 0.4,
            max_obstacle_radius: 0.9,
            capture_radius: 0.4,
            agent_radius: 0.15,
            speed: 1.0,
            max_turn_rate: 2.0,
            dt: 0.1,
            max_steps: 300,
            rays: 24,
            ray_range: 3.0,
            ray_fov: PI,
            min_start_goal_distance: 6.0,
        }
    }
}

impl NavConfig {
    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn observation_dim(&self) -> usize {
        3 + self.rays
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Success,
    Collision,
    Timeout,
}

const STEP_PENALTY: f64 = 0.001;

#[derive(Debug, Clone)]
pub struct NavWorld {
    config: NavConfig,
    obstacles: Vec<Circle>,
    goal: [f64; 2],
    position: [f64; 2],
    heading: f64,
    speed: f64,
    steps: usize,
    outcome: Outcome,
    score: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI) % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a - PI
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl NavWorld {
    /// World with no episode started; call [`Environment::reset`] before stepping.
    pub fn new(config: NavConfig) -> Self {
        Self {
            obstacles: Vec::new(),
            goal: [config.width / 2.0, config.height / 2.0],
            position: [config.width / 2.0, config.height / 2.0],
            heading: 0.0,
            speed: config.speed,
            steps: 0,
            outcome: Outcome::Running,
            score: 0.0,
            config,
        }
    }

    /// Explicit layout. Obstacles overlapping the start or goal disks are rejected.
    pub fn with_layout(
        config: NavConfig,
        start: [f64; 2],
        heading: f64,
        goal: [f64; 2],
        obstacles: Vec<Circle>,
    ) -> Result<Self> {
        for o in &obstacles {
            if dist(o.center, start) <= o.radius + config.agent_radius
                || dist(o.center, goal) <= o.radius + config.capture_radius
            {
                return Err(Error::invalid("obstacle overlaps the start or goal disk"));
            }
        }
        let mut w = Self::new(config);
        w.obstacles = obstacles;
        w.goal = goal;
        w.position = w.clamp_position(start);
        w.heading = wrap_angle(heading);
        w.update_outcome();
        Ok(w)
    }

    pub fn config(&self) -> &NavConfig {
        &self.config
    }

    pub fn obstacles(&self) -> &[Circle] {
        &self.obstacles
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    /// Accumulated episode score.
    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn goal_distance(&self) -> f64 {
        dist(self.position, self.goal)
    }

    /// Goal bearing relative to the heading, in `(-π, π]`.
    pub fn goal_bearing(&self) -> f64 {
        let dx = self.goal[0] - self.position[0];
        let dy = self.goal[1] - self.position[1];
        wrap_angle(dy.atan2(dx) - self.heading)
    }

    fn clamp_position(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(0.0, self.config.width),
            p[1].clamp(0.0, self.config.height),
        ]
    }

    fn update_outcome(&mut self) {
        let c = &self.config;
        self.outcome = if self.goal_distance() <= c.capture_radius {
            Outcome::Success
        } else if self
            .obstacles
            .iter()
            .any(|o| dist(o.center, self.position) <= o.radius + c.agent_radius)
        {
            Outcome::Collision
        } else if self.steps >= c.max_steps {
            Outcome::Timeout
        } else {
            Outcome::Running
        };
    }

    /// Angles of the ray fan relative to the heading.
    pub fn ray_angles(&self) -> Vec<f64> {
        let k = self.config.rays;
        if k == 1 {
            return vec![0.0];
        }
        let fov = self.config.ray_fov.min(2.0 * PI);
        if fov >= 2.0 * PI - 1e-9 {
            return (0..k)
                .map(|i| -PI + 2.0 * PI * i as f64 / k as f64)
                .collect();
        }
        (0..k)
            .map(|i| -fov / 2.0 + fov * i as f64 / (k - 1) as f64)
            .collect()
    }

    /// Distance from the agent center to the first obstacle surface along
    /// `angle` (world frame), capped at the ray range.
    fn cast(&self, angle: f64) -> f64 {
        let (dx, dy) = (angle.cos(), angle.sin());
        let mut best = self.config.ray_range;
        for o in &self.obstacles {
            let fx = self.position[0] - o.center[0];
            let fy = self.position[1] - o.center[1];
            let b = fx * dx + fy * dy;
            let c = fx * fx + fy * fy - o.radius * o.radius;
            let disc = b * b - c;
            if disc < 0.0 {
                continue;
            }
            let t = -b - disc.sqrt();
            let t = if t >= 0.0 {
                t
            } else if c < 0.0 {
                0.0
            } else {
                continue;
            };
            best = best.min(t);
        }
        best
    }

    fn place_obstacles(&mut self, rng: &mut Rng, start: [f64; 2]) {
        let c = self.config.clone();
        let mut obstacles: Vec<Circle> = Vec::with_capacity(c.obstacles);
        let mut attempts = 0;
        while obstacles.len() < c.obstacles && attempts < 1000 {
            attempts += 1;
            let radius = rng.uniform_range(c.min_obstacle_radius, c.max_obstacle_radius);
            // Half the obstacles sit near the straight start-goal line.
            let center = if obstacles.len().is_multiple_of(2) {
                let t = rng.uniform_range(0.25, 0.75);
                let (dx, dy) = (self.goal[0] - start[0], self.goal[1] - start[1]);
                let len = dx.hypot(dy);
                let off = rng.normal() * 0.6;
                [
                    start[0] + t * dx - dy / len * off,
                    start[1] + t * dy + dx / len * off,
                ]
            } else {
                [
                    rng.uniform_range(0.0, c.width),
                    rng.uniform_range(0.0, c.height),
                ]
            };
            let clear_start = dist(center, start) > radius + c.agent_radius + 0.5;
            let clear_goal = dist(center, self.goal) > radius + c.capture_radius + 0.3;
            let passable = obstacles
                .iter()
                .all(|o| dist(o.center, center) > o.radius + radius + 4.0 * c.agent_radius);
            if clear_start && clear_goal && passable {
                obstacles.push(Circle { center, radius });
            }
        }
        self.obstacles = obstacles;
    }
}

impl Environment for NavWorld {
    fn observation_dim(&self) -> usize {
        self.config.observation_dim()
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        let c = self.config.clone();
        let margin = 1.0;
        let (start, goal) = loop {
            let s = [
                rng.uniform_range(margin, c.width - margin),
                rng.uniform_range(margin, c.height - margin),
            ];
            let g = [
                rng.uniform_range(margin, c.width - margin),
                rng.uniform_range(margin, c.height - margin),
            ];
            if dist(s, g) >= c.min_start_goal_distance {
                break (s, g);
            }
        };
        self.goal = goal;
        self.position = start;
        self.place_obstacles(rng, start);
        let direct = (goal[1] - start[1]).atan2(goal[0] - start[0]);
        self.heading = wrap_angle(direct + rng.uniform_range(-PI / 4.0, PI / 4.0));
        self.speed = c.speed;
        self.steps = 0;
        self.score = 0.0;
        self.update_outcome();
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        check_action(action, 2)?;
        if self.is_done() {
            return Err(Error::contract("step called on a finished episode"));
        }
        let observation = self.observation();
        let turn = clamp_unit(action[0]);
        let throttle = clamp_unit(action[1]);
        let c = &self.config;
        self.heading = wrap_angle(self.heading + turn * c.max_turn_rate * c.dt);
        self.speed = c.speed * (1.0 + 0.5 * throttle);
        let p = [
            self.position[0] + self.speed * c.dt * self.heading.cos(),
            self.position[1] + self.speed * c.dt * self.heading.sin(),
        ];
        self.position = self.clamp_position(p);
        self.steps += 1;
        self.update_outcome();
        let reward = -STEP_PENALTY
            + match self.outcome {
                Outcome::Success => 1.0,
                Outcome::Collision => -1.0,
                Outcome::Running | Outcome::Timeout => 0.0,
            };
        self.score += reward;
        Ok(Transition {
            observation,
            action: vec![turn, throttle],
            reward,
            next_observation: self.observation(),
            done: self.is_done(),
        })
    }

    fn observation(&self) -> Vec<f64> {
        let bearing = self.goal_bearing();
        let mut obs = vec![
            bearing.cos(),
            bearing.sin(),
            (self.goal_distance() / self.config.diagonal()).min(1.0),
        ];
        for a in self.ray_angles() {
            obs.push(self.cast(self.heading + a) / self.config.ray_range);
        }
        obs
    }

    fn is_done(&self) -> bool {
        self.outcome != Outcome::Running
    }

    fn is_truncated(&self) -> bool {
        self.outcome == Outcome::Timeout
    }
}

/// Scripted navigation expert. Samples candidate headings around the agent,
/// keeps those whose path is clear of obstacles (inflated by the agent radius
/// and a margin) for the lookahead distance, and steers toward the clear
/// heading closest to the goal direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavExpert {
    pub steer_gain: f64,
    pub lookahead: f64,
    /// Extra clearance beyond agent plus obstacle radius.
    pub margin: f64,
    pub candidates: usize,
    /// Cost per radian of deviation from the current heading; damps dithering.
    pub inertia: f64,
}

impl Default for NavExpert {
    fn default() -> Self {
        Self {
            steer_gain: 3.0,
            lookahead: 2.0,
            margin: 0.25,
            candidates: 72,
            inertia: 0.2,
        }
    }
}

impl NavExpert {
    /// Free travel along world angle `theta` before entering an inflated obstacle.
    fn clearance(&self, w: &NavWorld, theta: f64) -> f64 {
        let (dx, dy) = (theta.cos(), theta.sin());
        let mut best = f64::INFINITY;
        for o in &w.obstacles {
            let r = o.radius + w.config.agent_radius + self.margin;
            let fx = w.position[0] - o.center[0];
            let fy = w.position[1] - o.center[1];
            let b = fx * dx + fy * dy;
            let c = fx * fx + fy * fy - r * r;
            if c < 0.0 {
                // already inside the inflated disk: only headings leading out are free
                if b < 0.0 {
                    best = 0.0;
                }
                continue;
            }
            let disc = b * b - c;
            if disc < 0.0 || b >= 0.0 {
                continue;
            }
            best = best.min(-b - disc.sqrt());
        }
        best
    }
}

impl Expert<NavWorld> for NavExpert {
    fn act(&self, w: &NavWorld) -> Vec<f64> {
        let goal_dir = w.heading + w.goal_bearing();
        let need = self.lookahead.min(w.goal_distance());
        let mut best: Option<(f64, f64)> = None; // (cost, relative angle)
        let mut widest = (f64::NEG_INFINITY, 0.0);
        for i in 0..self.candidates {
            let rel = wrap_angle(-PI + 2.0 * PI * i as f64 / self.candidates as f64);
            let theta = w.heading + rel;
            let free = self.clearance(w, theta);
            if free > widest.0 {
                widest = (free, rel);
            }
            if free < need {
                continue;
            }
            let cost = wrap_angle(theta - goal_dir).abs() + self.inertia * rel.abs();
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, rel));
            }
        }
        let rel = match best {
            Some((_, rel)) => rel,
            None => widest.1,
        };
        let turn = clamp_unit(self.steer_gain * rel);
        // slow down while turning hard so the turn radius shrinks
        let throttle = if rel.abs() > 0.5 { -1.0 } else { 0.0 };
        vec![turn, throttle]
    }
}

/// Default expert applied to `world`.
pub fn nav_expert(world: &NavWorld) -> Vec<f64> {
    NavExpert::default().act(world)
}
