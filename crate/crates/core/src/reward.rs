//! Human-comfort reward for a planned path.
//!
//! A plan is a 12-point polyline: the start, ten nodes on the fixed y-grid
//! `{-10, -8, …, 8}` and the destination. Two views of it feed the six reward
//! terms:
//!
//! * the 11 segment vectors between consecutive points (shortest path and
//!   direction-change terms), and
//! * `N` points sampled uniformly in arc length along the whole polyline
//!   (parallel-walking, side, boundary and obstacle terms).
//!
//! Every function here is pure.

use serde::{Deserialize, Serialize};

use crate::env::{Obstacle, Scenario, Vec2, CORRIDOR_HALF_WIDTH};
use crate::error::{Error, Result};

pub const NODE_COUNT: usize = 10;
pub const SEGMENT_COUNT: usize = NODE_COUNT + 1;
pub const NODE_YS: [f64; NODE_COUNT] = [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0];

/// Direction changes at or above this many degrees are penalised.
pub const TURN_THRESHOLD_DEG: f64 = 30.0;
/// Samples with `|x|` at or above this are too close to a wall.
pub const BOUNDARY_MARGIN_X: f64 = 4.5;
/// Per-sample reward (times danger²) for staying outside the obstacle.
pub const OUTSIDE_OBSTACLE_REWARD: f64 = 0.01;
/// Angles are compared after rounding away float noise of this size, so a
/// turn constructed at exactly 30° is not lost to `atan2` rounding.
const ANGLE_TOLERANCE_DEG: f64 = 1e-9;

/// Heaviside step with θ(0) = 1.
#[inline]
pub fn heaviside(n: f64) -> f64 {
    if n >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Ten node x-coordinates, clamped to the corridor on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    node_x: [f64; NODE_COUNT],
}

impl PathPlan {
    pub fn new(node_x: [f64; NODE_COUNT]) -> Self {
        let h = CORRIDOR_HALF_WIDTH;
        Self {
            node_x: node_x.map(|x| if x.is_nan() { 0.0 } else { x.clamp(-h, h) }),
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut node_x = [0.0; NODE_COUNT];
        node_x.copy_from_slice(&xs[..NODE_COUNT]);
        Self::new(node_x)
    }

    /// All nodes on the corridor's center line.
    pub fn center() -> Self {
        Self::new([0.0; NODE_COUNT])
    }

    /// Nodes on the straight line from start to destination.
    pub fn straight(scenario: &Scenario) -> Self {
        let (a, b) = (scenario.start, scenario.destination);
        Self::new(NODE_YS.map(|y| a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y)))
    }

    pub fn node_x(&self) -> &[f64; NODE_COUNT] {
        &self.node_x
    }

    /// `self` with every x (and the scenario it belongs to) reflected through 0.
    pub fn mirrored(&self) -> Self {
        Self::new(self.node_x.map(|x| -x))
    }

    /// The full polyline: start, ten nodes, destination.
    pub fn polyline(&self, scenario: &Scenario) -> [Vec2; NODE_COUNT + 2] {
        let mut pts = [Vec2::ZERO; NODE_COUNT + 2];
        pts[0] = scenario.start;
        for (i, (&x, &y)) in self.node_x.iter().zip(NODE_YS.iter()).enumerate() {
            pts[i + 1] = Vec2::new(x, y);
        }
        pts[NODE_COUNT + 1] = scenario.destination;
        pts
    }
}

/// Difference vectors between consecutive polyline points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentList(pub [Vec2; SEGMENT_COUNT]);

/// Points sampled uniformly in arc length, both endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleList(pub Vec<Vec2>);

impl SampleList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec2> {
        self.0.iter()
    }
}

/// Weights and knobs of the total reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardCoefficients {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    pub kappa5: f64,
    pub kappa6: f64,
    /// Bias added to the shortest-path term.
    pub bias_b: f64,
    /// Number of arc-length samples `N`.
    pub sample_count: usize,
    /// +1 penalises samples with x ≤ 0, -1 penalises x ≥ 0.
    pub side_sign: f64,
}

impl Default for RewardCoefficients {
    fn default() -> Self {
        Self {
            kappa1: 0.02,
            kappa2: 0.5,
            kappa3: 0.2,
            kappa4: 0.01,
            kappa5: 0.5,
            kappa6: 1.0,
            bias_b: 44.0,
            sample_count: 110,
            side_sign: 1.0,
        }
    }
}

impl RewardCoefficients {
    /// Unit weights, zero bias.
    pub fn unit(sample_count: usize) -> Self {
        Self {
            kappa1: 1.0,
            kappa2: 1.0,
            kappa3: 1.0,
            kappa4: 1.0,
            kappa5: 1.0,
            kappa6: 1.0,
            bias_b: 0.0,
            sample_count,
            side_sign: 1.0,
        }
    }

    pub fn kappa(&self) -> [f64; 6] {
        [
            self.kappa1,
            self.kappa2,
            self.kappa3,
            self.kappa4,
            self.kappa5,
            self.kappa6,
        ]
    }

    pub fn with_kappa(mut self, k: [f64; 6]) -> Self {
        [
            self.kappa1,
            self.kappa2,
            self.kappa3,
            self.kappa4,
            self.kappa5,
            self.kappa6,
        ] = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa().iter().any(|k| !k.is_finite() || *k < 0.0) {
            return Err(Error::Config(
                "reward kappas must be finite and non-negative".into(),
            ));
        }
        if !self.bias_b.is_finite() {
            return Err(Error::Config("rewards.bias_b must be finite".into()));
        }
        if self.sample_count < 12 {
            return Err(Error::Config(format!(
                "rewards.sample_count = {} must be at least 12",
                self.sample_count
            )));
        }
        if self.side_sign != 1.0 && self.side_sign != -1.0 {
            return Err(Error::Config("rewards.side_sign must be 1 or -1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub r: [f64; 6],
    pub total: f64,
}

pub fn build_segments(scenario: &Scenario, plan: &PathPlan) -> SegmentList {
    let pts = plan.polyline(scenario);
    let mut seg = [Vec2::ZERO; SEGMENT_COUNT];
    for (s, w) in seg.iter_mut().zip(pts.windows(2)) {
        *s = w[1] - w[0];
    }
    SegmentList(seg)
}

/// Sample `n` points along the polyline at equal arc-length spacing.
pub fn sample_path(scenario: &Scenario, plan: &PathPlan, n: usize) -> SampleList {
    SampleList(resample_polyline(&plan.polyline(scenario), n))
}

/// `n ≥ 2` points spaced uniformly in cumulative arc length along `pts`,
/// first and last points reproduced exactly.
pub fn resample_polyline(pts: &[Vec2], n: usize) -> Vec<Vec2> {
    assert!(
        n >= 2 && pts.len() >= 2,
        "need at least two samples of a polyline with two points"
    );
    let mut cumulative = Vec::with_capacity(pts.len());
    cumulative.push(0.0);
    for w in pts.windows(2) {
        cumulative.push(cumulative[cumulative.len() - 1] + w[1].distance(w[0]));
    }
    let last = pts.len() - 1;
    let total = cumulative[last];

    let mut out = Vec::with_capacity(n);
    out.push(pts[0]);
    let mut seg = 0;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while seg + 1 < last && cumulative[seg + 1] < target {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 {
            ((target - cumulative[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(pts[seg].lerp(pts[seg + 1], t));
    }
    out.push(pts[last]);
    out
}

/// Shortest path: negative sum of squared segment lengths plus bias.
pub fn r1_shortest(segments: &SegmentList, bias: f64) -> f64 {
    -segments.0.iter().map(|p| p.norm_sq()).sum::<f64>() + bias
}

/// Angle between two vectors in degrees, in [0, 180].
pub fn angle_deg(a: Vec2, b: Vec2) -> f64 {
    let cross = a.x * b.y - a.y * b.x;
    cross.abs().atan2(a.dot(b)).to_degrees()
}

/// Direction changes: -1 for every consecutive pair turning by ≥ 30°.
pub fn r2_direction(segments: &SegmentList) -> f64 {
    -segments
        .0
        .windows(2)
        .map(|w| heaviside(angle_deg(w[0], w[1]) - TURN_THRESHOLD_DEG + ANGLE_TOLERANCE_DEG))
        .sum::<f64>()
}

/// Walking parallel to the sides: negative total variation of x.
pub fn r3_parallel(samples: &SampleList) -> f64 {
    -samples
        .0
        .windows(2)
        .map(|w| (w[1].x - w[0].x).abs())
        .sum::<f64>()
}

/// Side convention: -1 per sample on the disfavoured side (x = 0 included).
pub fn r4_left_side(samples: &SampleList, side_sign: f64) -> f64 {
    -samples
        .iter()
        .map(|s| heaviside(-side_sign * s.x))
        .sum::<f64>()
}

/// Wall proximity: -1 per sample with |x| ≥ 4.5.
pub fn r5_boundary(samples: &SampleList) -> f64 {
    -samples
        .iter()
        .map(|s| heaviside(s.x.abs() - BOUNDARY_MARGIN_X))
        .sum::<f64>()
}

/// Reward contribution of one sample against an obstacle.
#[inline]
pub fn obstacle_sample_term(s: Vec2, o: &Obstacle) -> f64 {
    let r2 = o.radius * o.radius;
    let delta = s.distance(o.center).powi(2) - r2;
    let d2 = o.danger * o.danger;
    if delta < 0.0 {
        delta / r2 * d2
    } else {
        OUTSIDE_OBSTACLE_REWARD * d2
    }
}

/// Obstacle avoidance: penetration depth inside the disk is penalised, every
/// sample outside earns a small constant.
pub fn r6_obstacle(samples: &SampleList, obstacle: Option<&Obstacle>) -> f64 {
    match obstacle {
        None => 0.0,
        Some(o) => samples.iter().map(|&s| obstacle_sample_term(s, o)).sum(),
    }
}

pub fn breakdown_from_parts(
    segments: &SegmentList,
    samples: &SampleList,
    obstacle: Option<&Obstacle>,
    coeffs: &RewardCoefficients,
) -> RewardBreakdown {
    let r = [
        r1_shortest(segments, coeffs.bias_b),
        r2_direction(segments),
        r3_parallel(samples),
        r4_left_side(samples, coeffs.side_sign),
        r5_boundary(samples),
        r6_obstacle(samples, obstacle),
    ];
    let total = r.iter().zip(coeffs.kappa()).map(|(r, k)| r * k).sum();
    RewardBreakdown { r, total }
}

/// All six components and their weighted sum.
pub fn total_reward(
    scenario: &Scenario,
    plan: &PathPlan,
    coeffs: &RewardCoefficients,
) -> RewardBreakdown {
    let segments = build_segments(scenario, plan);
    let samples = sample_path(scenario, plan, coeffs.sample_count);
    breakdown_from_parts(&segments, &samples, scenario.obstacle.as_ref(), coeffs)
}

/// Whether any sample of the plan falls strictly inside the obstacle disk.
pub fn collides(scenario: &Scenario, plan: &PathPlan, n: usize) -> bool {
    let Some(o) = &scenario.obstacle else {
        return false;
    };
    sample_path(scenario, plan, n)
        .iter()
        .any(|s| s.distance(o.center) < o.radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_center() -> (Scenario, PathPlan) {
        (Scenario::new(0.0, 0.0, None), PathPlan::center())
    }

    fn samples_at(xs: &[f64]) -> SampleList {
        SampleList(
            xs.iter()
                .enumerate()
                .map(|(i, &x)| Vec2::new(x, i as f64))
                .collect(),
        )
    }

    #[test]
    fn heaviside_is_one_at_zero() {
        assert_eq!(heaviside(0.0), 1.0);
        assert_eq!(heaviside(-0.0), 1.0);
        assert_eq!(heaviside(-1e-300), 0.0);
    }

    #[test]
    fn plan_is_clamped() {
        let p = PathPlan::new([7.0, -9.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, f64::NAN]);
        assert_eq!(p.node_x()[0], 5.0);
        assert_eq!(p.node_x()[1], -5.0);
        assert_eq!(p.node_x()[9], 0.0);
    }

    #[test]
    fn segments_examples() {
        let (s, p) = straight_center();
        let seg = build_segments(&s, &p);
        assert!(seg.0.iter().all(|v| *v == Vec2::new(0.0, 2.0)));

        let mut xs = [0.0; 10];
        xs[0] = 2.0;
        let seg = build_segments(&s, &PathPlan::new(xs));
        assert_eq!(seg.0[0], Vec2::new(2.0, 2.0));
        assert_eq!(seg.0[1], Vec2::new(-2.0, 2.0));
    }

    #[test]
    fn straight_sampling_is_on_the_meter_grid() {
        let (s, p) = straight_center();
        let samples = sample_path(&s, &p, 23);
        for (i, pt) in samples.iter().enumerate() {
            assert_eq!(pt.x, 0.0);
            assert!((pt.y - (-12.0 + i as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn r1_examples() {
        let (s, p) = straight_center();
        let seg = build_segments(&s, &p);
        assert_eq!(r1_shortest(&seg, 0.0), -44.0);
        assert_eq!(r1_shortest(&seg, 44.0), 0.0);
    }

    #[test]
    fn r2_examples() {
        let (s, p) = straight_center();
        assert_eq!(r2_direction(&build_segments(&s, &p)), 0.0);

        let mut seg = build_segments(&s, &p);
        let t30 = 30f64.to_radians();
        seg.0[4] = Vec2::new(2.0 * t30.tan(), 2.0);
        // Pair (3,4) turns by 30°, pair (4,5) turns back by 30°.
        assert_eq!(r2_direction(&seg), -2.0);

        let mut seg = build_segments(&s, &p);
        seg.0[10] = Vec2::new(2.0 * 30f64.to_radians().tan(), 2.0);
        assert_eq!(r2_direction(&seg), -1.0);

        let mut seg = build_segments(&s, &p);
        seg.0[10] = Vec2::new(2.0 * 29.9f64.to_radians().tan(), 2.0);
        assert_eq!(r2_direction(&seg), 0.0);
    }

    #[test]
    fn r3_examples() {
        assert_eq!(r3_parallel(&samples_at(&[0.0; 5])), 0.0);
        assert!((r3_parallel(&samples_at(&[0.0, 0.5, 1.0, 1.5, 2.0])) + 2.0).abs() < 1e-12);
        assert_eq!(r3_parallel(&samples_at(&[0.0, 2.0, 0.0])), -4.0);
    }

    #[test]
    fn r4_examples() {
        assert_eq!(r4_left_side(&samples_at(&[1.0; 7]), 1.0), 0.0);
        assert_eq!(r4_left_side(&samples_at(&[-1.0; 7]), 1.0), -7.0);
        assert_eq!(r4_left_side(&samples_at(&[0.0]), 1.0), -1.0);
        assert_eq!(r4_left_side(&samples_at(&[1.0; 7]), -1.0), -7.0);
    }

    #[test]
    fn r5_examples() {
        assert_eq!(r5_boundary(&samples_at(&[0.0; 9])), 0.0);
        assert_eq!(r5_boundary(&samples_at(&[0.0, 4.5, 0.0])), -1.0);
        assert_eq!(r5_boundary(&samples_at(&[-4.8])), -1.0);
    }

    #[test]
    fn r6_examples() {
        let o = Obstacle {
            center: Vec2::new(0.0, 0.0),
            radius: 1.0,
            danger: 0.0,
        };
        assert_eq!(r6_obstacle(&samples_at(&[0.0, 0.3, -0.2]), Some(&o)), 0.0);

        let o = Obstacle { danger: 1.0, ..o };
        let at_center = SampleList(vec![Vec2::ZERO]);
        assert_eq!(r6_obstacle(&at_center, Some(&o)), -1.0);

        let far = SampleList(vec![Vec2::new(3.0, 0.0); 17]);
        assert!((r6_obstacle(&far, Some(&o)) - 0.17).abs() < 1e-12);

        // On the circle counts as outside.
        let rim = SampleList(vec![Vec2::new(1.0, 0.0)]);
        assert_eq!(r6_obstacle(&rim, Some(&o)), 0.01);

        assert_eq!(r6_obstacle(&far, None), 0.0);
    }

    #[test]
    fn total_examples() {
        let (s, p) = straight_center();
        let zero = RewardCoefficients::unit(23).with_kappa([0.0; 6]);
        assert_eq!(total_reward(&s, &p, &zero).total, 0.0);

        let b = total_reward(&s, &p, &RewardCoefficients::unit(23));
        assert_eq!(b.r, [-44.0, 0.0, 0.0, -23.0, 0.0, 0.0]);
        assert_eq!(b.total, -67.0);
    }

    #[test]
    fn collision_examples() {
        let (s, p) = straight_center();
        assert!(!collides(&s, &p, 110));
        let hit = Scenario::new(
            0.0,
            0.0,
            Some(Obstacle {
                center: Vec2::ZERO,
                radius: 1.0,
                danger: 0.5,
            }),
        );
        assert!(collides(&hit, &p, 110));
        let miss = Scenario::new(
            0.0,
            0.0,
            Some(Obstacle {
                center: Vec2::new(4.0, 0.0),
                radius: 0.5,
                danger: 0.5,
            }),
        );
        assert!(!collides(&miss, &p, 110));
    }

    #[test]
    fn straight_plan_interpolates_endpoints() {
        let s = Scenario::new(-4.0, 4.0, None);
        let p = PathPlan::straight(&s);
        let seg = build_segments(&s, &p);
        assert!(seg.0.iter().all(|v| (v.x - seg.0[0].x).abs() < 1e-12));
        assert_eq!(r2_direction(&seg), 0.0);
    }
}
