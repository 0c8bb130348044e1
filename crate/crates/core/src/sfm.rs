//! Social force baseline for a single pedestrian.
//!
//! The agent relaxes towards walking at `desired_speed` straight at the
//! destination and is pushed away from the obstacle and the two side walls by
//! exponential repulsions. The obstacle's danger level plays no role here.

use serde::{Deserialize, Serialize};

use crate::env::{Scenario, Vec2, CORRIDOR_HALF_WIDTH};
use crate::error::{Error, Result};

/// Lateral offset assumed when the agent is exactly in line with the
/// obstacle center.
const HEAD_ON_OFFSET: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SfmConfig {
    pub desired_speed: f64,
    pub relaxation_time: f64,
    pub obstacle_strength: f64,
    pub obstacle_range: f64,
    pub wall_strength: f64,
    pub wall_range: f64,
    pub dt: f64,
    pub max_steps: usize,
    /// Integration stops once the agent is this close to the destination.
    pub arrival_radius: f64,
}

impl Default for SfmConfig {
    fn default() -> Self {
        Self {
            desired_speed: 1.34,
            relaxation_time: 0.5,
            obstacle_strength: 2.1,
            obstacle_range: 0.35,
            wall_strength: 10.0,
            wall_range: 0.2,
            dt: 0.05,
            max_steps: 4000,
            arrival_radius: 0.3,
        }
    }
}

impl SfmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("desired_speed", self.desired_speed),
            ("relaxation_time", self.relaxation_time),
            ("obstacle_strength", self.obstacle_strength),
            ("obstacle_range", self.obstacle_range),
            ("wall_strength", self.wall_strength),
            ("wall_range", self.wall_range),
            ("dt", self.dt),
            ("arrival_radius", self.arrival_radius),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("sfm.{k} must be positive")));
            }
        }
        if self.dt > 0.1 {
            return Err(Error::Config(format!("sfm.dt = {} exceeds 0.1", self.dt)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("sfm.max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfmState {
    pub position: Vec2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub position: Vec2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory(pub Vec<TrajectoryPoint>);

impl Trajectory {
    pub fn positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.0.iter().map(|p| p.position)
    }

    pub fn max_abs_x(&self) -> f64 {
        self.positions().map(|p| p.x.abs()).fold(0.0, f64::max)
    }

    /// Lateral position where the trajectory crosses height `y`, linearly
    /// interpolated between steps.
    pub fn x_at_y(&self, y: f64) -> Option<f64> {
        self.0.windows(2).find_map(|w| {
            let (a, b) = (w[0].position, w[1].position);
            if (a.y - y) * (b.y - y) <= 0.0 && a.y != b.y {
                Some(a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y))
            } else {
                None
            }
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,y,vx,vy\n");
        for p in &self.0 {
            s.push_str(&format!(
                "{:.4},{:.9},{:.9},{:.9},{:.9}\n",
                p.t, p.position.x, p.position.y, p.velocity.x, p.velocity.y
            ));
        }
        s
    }
}

/// Sum of driving, obstacle and wall forces per unit mass.
pub fn acceleration(state: &SfmState, scenario: &Scenario, cfg: &SfmConfig) -> Vec2 {
    let to_dest = scenario.destination - state.position;
    let dist = to_dest.norm();
    let heading = if dist > 0.0 {
        to_dest * (1.0 / dist)
    } else {
        Vec2::ZERO
    };
    let mut acc = (heading * cfg.desired_speed - state.velocity) * (1.0 / cfg.relaxation_time);

    if let Some(o) = &scenario.obstacle {
        let mut away = state.position - o.center;
        if away.x == 0.0 {
            // Exactly head-on the push has no lateral part and the agent
            // would stall in front of the obstacle; pass it on the +x side.
            away.x = HEAD_ON_OFFSET;
        }
        let d = away.norm();
        if d > 0.0 {
            let magnitude = cfg.obstacle_strength * ((o.radius - d) / cfg.obstacle_range).exp();
            acc = acc + away * (magnitude / d);
        }
    }

    let x = state.position.x;
    let from_left = CORRIDOR_HALF_WIDTH + x;
    let from_right = CORRIDOR_HALF_WIDTH - x;
    acc.x += cfg.wall_strength
        * ((-from_left / cfg.wall_range).exp() - (-from_right / cfg.wall_range).exp());
    acc
}

/// One semi-implicit Euler step.
pub fn sfm_step(state: &SfmState, scenario: &Scenario, cfg: &SfmConfig) -> SfmState {
    let acc = acceleration(state, scenario, cfg);
    let velocity = state.velocity + acc * cfg.dt;
    let mut position = state.position + velocity * cfg.dt;
    position.x = position.x.clamp(-CORRIDOR_HALF_WIDTH, CORRIDOR_HALF_WIDTH);
    SfmState { position, velocity }
}

/// Integrate from rest at the start until the agent reaches the destination.
pub fn simulate(scenario: &Scenario, cfg: &SfmConfig) -> Result<Trajectory> {
    let mut state = SfmState {
        position: scenario.start,
        velocity: Vec2::ZERO,
    };
    let mut out = Vec::with_capacity(1024);
    out.push(TrajectoryPoint {
        t: 0.0,
        position: state.position,
        velocity: state.velocity,
    });
    for step in 1..=cfg.max_steps {
        state = sfm_step(&state, scenario, cfg);
        out.push(TrajectoryPoint {
            t: step as f64 * cfg.dt,
            position: state.position,
            velocity: state.velocity,
        });
        if state.position.distance(scenario.destination) < cfg.arrival_radius {
            return Ok(Trajectory(out));
        }
    }
    Err(Error::NonConvergence {
        steps: cfg.max_steps,
    })
}
