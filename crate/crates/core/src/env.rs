//! The corridor world: scenario generation, observation encoding and the
//! success-gated reset rule.
//!
//! The walkable area is x ∈ [-5, 5], y ∈ [-12, 10]. The agent always starts
//! on the bottom edge (y = -12) and heads for a destination on the top edge
//! (y = 10). At most one round obstacle sits somewhere in the band where the
//! path nodes live.

use std::ops::{Add, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CORRIDOR_HALF_WIDTH: f64 = 5.0;
pub const START_Y: f64 = -12.0;
pub const DEST_Y: f64 = 10.0;
pub const OBSTACLE_Y_MIN: f64 = -10.0;
pub const OBSTACLE_Y_MAX: f64 = 8.0;
pub const RADIUS_MIN: f64 = 0.5;
pub const RADIUS_MAX: f64 = 2.0;

/// Length of the observation vector fed to the policy.
pub const OBS_DIM: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation, `t = 0` gives `self`.
    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        Vec2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// A round region the pedestrian would rather not walk through.
///
/// `radius` describes the perceived extent of the interference, not only the
/// physical footprint; `danger` scales how strongly it repels a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
    pub danger: f64,
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        let c = self.center;
        if !c.is_finite() || !self.radius.is_finite() || !self.danger.is_finite() {
            return Err(Error::InvalidScenario(
                "obstacle has non-finite fields".into(),
            ));
        }
        if !(RADIUS_MIN..=RADIUS_MAX).contains(&self.radius) {
            return Err(Error::InvalidScenario(format!(
                "obstacle radius {} outside [{RADIUS_MIN}, {RADIUS_MAX}]",
                self.radius
            )));
        }
        if !(0.0..=1.0).contains(&self.danger) {
            return Err(Error::InvalidScenario(format!(
                "obstacle danger {} outside [0, 1]",
                self.danger
            )));
        }
        if c.x.abs() > CORRIDOR_HALF_WIDTH || !(OBSTACLE_Y_MIN..=OBSTACLE_Y_MAX).contains(&c.y) {
            return Err(Error::InvalidScenario(format!(
                "obstacle center ({}, {}) outside the corridor band",
                c.x, c.y
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub start: Vec2,
    pub destination: Vec2,
    #[serde(default)]
    pub obstacle: Option<Obstacle>,
}

impl Scenario {
    /// Scenario with the agent starting at `start_x` and heading to `dest_x`.
    pub fn new(start_x: f64, dest_x: f64, obstacle: Option<Obstacle>) -> Self {
        Self {
            start: Vec2::new(start_x, START_Y),
            destination: Vec2::new(dest_x, DEST_Y),
            obstacle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.start.y != START_Y || self.destination.y != DEST_Y {
            return Err(Error::InvalidScenario(format!(
                "start must lie on y = {START_Y} and destination on y = {DEST_Y}"
            )));
        }
        for (what, x) in [("start", self.start.x), ("destination", self.destination.x)] {
            if !x.is_finite() || x.abs() > CORRIDOR_HALF_WIDTH {
                return Err(Error::InvalidScenario(format!(
                    "{what} x = {x} outside [-5, 5]"
                )));
            }
        }
        if let Some(obstacle) = &self.obstacle {
            obstacle.validate()?;
        }
        Ok(())
    }

    /// The same scenario reflected through the corridor's center line.
    pub fn mirrored(&self) -> Scenario {
        let flip = |v: Vec2| Vec2::new(-v.x, v.y);
        Scenario {
            start: flip(self.start),
            destination: flip(self.destination),
            obstacle: self.obstacle.map(|o| Obstacle {
                center: flip(o.center),
                ..o
            }),
        }
    }
}

/// Environment settings. `seed` drives scenario generation for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Probability that a freshly drawn scenario contains an obstacle.
    pub p_obs: f64,
    /// How many consecutive collided iterations a scenario may be retained.
    pub retain_limit: u32,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            p_obs: 0.5,
            retain_limit: 10,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_obs) {
            return Err(Error::Config(format!(
                "env.p_obs = {} outside [0, 1]",
                self.p_obs
            )));
        }
        Ok(())
    }
}

/// Draw a random scenario. Deterministic for a given generator state.
pub fn new_scenario<R: Rng + ?Sized>(rng: &mut R, cfg: &EnvConfig) -> Scenario {
    let half = CORRIDOR_HALF_WIDTH;
    let start_x = rng.random_range(-half..=half);
    let dest_x = rng.random_range(-half..=half);
    // Always consume the same number of draws so streams stay aligned
    // regardless of p_obs.
    let present = rng.random::<f64>() < cfg.p_obs;
    let radius = rng.random_range(RADIUS_MIN..=RADIUS_MAX);
    let danger = rng.random_range(0.0..=1.0);
    let cx = rng.random_range(-half..=half);
    let cy = rng.random_range(OBSTACLE_Y_MIN..=OBSTACLE_Y_MAX);
    let obstacle = present.then(|| Obstacle {
        center: Vec2::new(cx, cy),
        radius,
        danger,
    });
    Scenario::new(start_x, dest_x, obstacle)
}

/// Fixed-layout observation:
/// `[start_x, dest_x, presence, obs_rel_x, obs_rel_y, obs_radius, obs_danger]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Encode what the agent perceives. Start and destination are given in the
/// corridor frame; the obstacle position is relative to the start.
pub fn observe(scenario: &Scenario) -> Observation {
    let mut v = [0.0; OBS_DIM];
    v[0] = scenario.start.x;
    v[1] = scenario.destination.x;
    if let Some(o) = &scenario.obstacle {
        let rel = o.center - scenario.start;
        v[2] = 1.0;
        v[3] = rel.x;
        v[4] = rel.y;
        v[5] = o.radius;
        v[6] = o.danger;
    }
    Observation(v)
}

/// Success-gated reset bookkeeping for one environment copy.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetState {
    pub current: Scenario,
    pub retained: u32,
    pub retain_limit: u32,
}

impl ResetState {
    pub fn new(current: Scenario, retain_limit: u32) -> Self {
        Self {
            current,
            retained: 0,
            retain_limit,
        }
    }
}

/// What [`advance_reset`] decided to do with the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetDecision {
    Fresh,
    Retain,
}

/// Pure transition of the reset rule: a collision-free plan or an exhausted
/// retention budget leads to a fresh scenario, otherwise the scenario stays.
pub fn reset_decision(retained: u32, retain_limit: u32, collided: bool) -> ResetDecision {
    if collided && retained < retain_limit {
        ResetDecision::Retain
    } else {
        ResetDecision::Fresh
    }
}

/// Advance the reset state after an episode, drawing a new scenario from
/// `rng` when the rule calls for one.
pub fn advance_reset<R: Rng + ?Sized>(
    state: ResetState,
    collided: bool,
    rng: &mut R,
    cfg: &EnvConfig,
) -> ResetState {
    match reset_decision(state.retained, state.retain_limit, collided) {
        ResetDecision::Retain => ResetState {
            retained: state.retained + 1,
            ..state
        },
        ResetDecision::Fresh => ResetState {
            current: new_scenario(rng, cfg),
            retained: 0,
            retain_limit: state.retain_limit,
        },
    }
}

/// One environment copy: its own random stream plus reset state.
#[derive(Debug, Clone)]
pub struct EnvWorker {
    pub state: ResetState,
    rng: ChaCha8Rng,
    cfg: EnvConfig,
}

impl EnvWorker {
    /// Worker `index` of a pool seeded with `cfg.seed`.
    pub fn new(cfg: &EnvConfig, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index);
        let first = new_scenario(&mut rng, cfg);
        Self {
            state: ResetState::new(first, cfg.retain_limit),
            rng,
            cfg: cfg.clone(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.state.current
    }

    pub fn advance(&mut self, collided: bool) {
        let state = self.state.clone();
        self.state = advance_reset(state, collided, &mut self.rng, &self.cfg);
    }
}
