//! Scenario suites, path metrics, the cross-entropy reference optimizer and
//! side-by-side comparison with the social force baseline.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{
    new_scenario, observe, EnvConfig, Obstacle, Scenario, Vec2, CORRIDOR_HALF_WIDTH, DEST_Y,
    START_Y,
};
use crate::error::{Error, Result};
use crate::policy::{self, PolicyParameters};
use crate::reward::{
    angle_deg, resample_polyline, total_reward, PathPlan, RewardCoefficients, BOUNDARY_MARGIN_X,
    NODE_COUNT, NODE_YS,
};
use crate::sfm::{self, SfmConfig, Trajectory};

/// Smallest evaluation budget accepted by [`reference_optimize`].
pub const MIN_ORACLE_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedScenario {
    pub name: String,
    pub start: Vec2,
    pub destination: Vec2,
    #[serde(default)]
    pub obstacle: Option<Obstacle>,
}

impl NamedScenario {
    pub fn new(name: impl Into<String>, scenario: Scenario) -> Self {
        Self {
            name: name.into(),
            start: scenario.start,
            destination: scenario.destination,
            obstacle: scenario.obstacle,
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            start: self.start,
            destination: self.destination,
            obstacle: self.obstacle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSuite {
    pub scenarios: Vec<NamedScenario>,
}

/// Obstacle lying beside the usual path.
pub const OFF_PATH_OBSTACLE: Obstacle = Obstacle {
    center: Vec2::new(4.0, -1.0),
    radius: 1.0,
    danger: 1.0,
};

/// Obstacle lying across the usual path; danger is set per case.
pub const ON_PATH_OBSTACLE: Obstacle = Obstacle {
    center: Vec2::new(0.5, -1.0),
    radius: 1.0,
    danger: 0.1,
};

impl ScenarioSuite {
    /// The four reference cases: no obstacle, an obstacle beside the path,
    /// and the same on-path obstacle at low and at full danger.
    pub fn canonical() -> Self {
        let on = |danger| Obstacle {
            danger,
            ..ON_PATH_OBSTACLE
        };
        Self {
            scenarios: vec![
                NamedScenario::new("a_no_obstacle", Scenario::new(0.0, 0.0, None)),
                NamedScenario::new(
                    "b_off_path",
                    Scenario::new(0.0, 0.0, Some(OFF_PATH_OBSTACLE)),
                ),
                NamedScenario::new(
                    "c_on_path_danger_0.1",
                    Scenario::new(0.0, 0.0, Some(on(0.1))),
                ),
                NamedScenario::new(
                    "d_on_path_danger_1.0",
                    Scenario::new(0.0, 0.0, Some(on(1.0))),
                ),
            ],
        }
    }

    /// `n` scenarios drawn from the training distribution.
    pub fn random(n: usize, env: &EnvConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            scenarios: (0..n)
                .map(|i| NamedScenario::new(format!("random_{i:03}"), new_scenario(&mut rng, env)))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let suite: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("suite line {}: {e}", e.line())))?;
        for s in &suite.scenarios {
            s.scenario()
                .validate()
                .map_err(|e| Error::Config(format!("suite scenario `{}`: {e}", s.name)))?;
        }
        Ok(suite)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serialises")
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathMetrics {
    pub total_length: f64,
    pub max_turn_deg: f64,
    /// Distance from the path to the obstacle rim; negative inside, infinite
    /// without an obstacle.
    pub min_clearance: f64,
    pub left_fraction: f64,
    pub boundary_violations: usize,
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    let t = if len_sq > 0.0 {
        ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a.lerp(b, t))
}

impl PathMetrics {
    /// Metrics of an arbitrary polyline. Side and boundary statistics use
    /// `coeffs.sample_count` arc-length samples.
    pub fn of_polyline(
        pts: &[Vec2],
        obstacle: Option<&Obstacle>,
        coeffs: &RewardCoefficients,
    ) -> Self {
        let total_length = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
        let steps: Vec<Vec2> = pts
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| d.norm_sq() > 0.0)
            .collect();
        let max_turn_deg = steps
            .windows(2)
            .map(|w| angle_deg(w[0], w[1]))
            .fold(0.0, f64::max);
        let min_clearance = match obstacle {
            None => f64::INFINITY,
            Some(o) => {
                pts.windows(2)
                    .map(|w| point_segment_distance(o.center, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
                    - o.radius
            }
        };
        let samples = resample_polyline(pts, coeffs.sample_count);
        let left = samples
            .iter()
            .filter(|s| coeffs.side_sign * s.x > 0.0)
            .count();
        let boundary_violations = samples
            .iter()
            .filter(|s| s.x.abs() >= BOUNDARY_MARGIN_X)
            .count();
        Self {
            total_length,
            max_turn_deg,
            min_clearance,
            left_fraction: left as f64 / samples.len() as f64,
            boundary_violations,
        }
    }

    pub fn of_plan(scenario: &Scenario, plan: &PathPlan, coeffs: &RewardCoefficients) -> Self {
        Self::of_polyline(&plan.polyline(scenario), scenario.obstacle.as_ref(), coeffs)
    }
}

/// Node positions where a trajectory crosses the plan's y-grid, so a social
/// force path can be scored by the same reward.
pub fn plan_from_trajectory(traj: &Trajectory) -> PathPlan {
    let mut xs = [0.0; NODE_COUNT];
    for (x, &y) in xs.iter_mut().zip(NODE_YS.iter()) {
        *x = traj
            .x_at_y(y)
            .unwrap_or_else(|| traj.0.last().map_or(0.0, |p| p.position.x));
    }
    PathPlan::new(xs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CemConfig {
    pub population: usize,
    pub elite: usize,
    pub initial_sigma: f64,
    pub min_sigma: f64,
    /// Weight of the new elite statistics in the mean/σ update.
    pub smoothing: f64,
    /// Extra standard deviation added on top of the elite spread, decayed
    /// geometrically per iteration so the search does not collapse early.
    pub extra_noise: f64,
    pub noise_decay: f64,
    pub seed: u64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            population: 256,
            elite: 32,
            initial_sigma: 2.0,
            min_sigma: 1e-3,
            smoothing: 0.7,
            extra_noise: 0.5,
            noise_decay: 0.97,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub plan: PathPlan,
    pub reward: f64,
    pub evaluations: usize,
}

/// Cross-entropy search for the reward-maximising plan.
///
/// The centre line and the straight start→destination line are scored first
/// and seed the best-so-far; the search distribution starts at the straight
/// line. Every iteration draws one full population, so a larger budget
/// replays the same prefix of iterations and can only improve the result.
pub fn reference_optimize(
    scenario: &Scenario,
    coeffs: &RewardCoefficients,
    budget: usize,
    cfg: &CemConfig,
) -> Result<OracleResult> {
    if budget < MIN_ORACLE_BUDGET {
        return Err(Error::Config(format!(
            "oracle budget {budget} below the minimum of {MIN_ORACLE_BUDGET}"
        )));
    }
    if cfg.elite == 0 || cfg.elite > cfg.population {
        return Err(Error::Config("cem.elite must be in 1..=population".into()));
    }
    let score = |p: &PathPlan| total_reward(scenario, p, coeffs).total;

    let mut best = (PathPlan::center(), score(&PathPlan::center()));
    let straight = PathPlan::straight(scenario);
    let s = score(&straight);
    if s > best.1 {
        best = (straight, s);
    }
    let mut evaluations = 2;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mean = *straight.node_x();
    let mut sigma = [cfg.initial_sigma; NODE_COUNT];
    let iterations = (budget - evaluations) / cfg.population;
    let mut population = vec![PathPlan::center(); cfg.population];
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(cfg.population);

    let mut noise = cfg.extra_noise;
    for _ in 0..iterations {
        for p in population.iter_mut() {
            let mut xs = [0.0; NODE_COUNT];
            for k in 0..NODE_COUNT {
                let z: f64 = StandardNormal.sample(&mut rng);
                xs[k] = mean[k] + sigma[k] * z;
            }
            *p = PathPlan::new(xs);
        }
        scored.clear();
        scored.par_extend(
            population
                .par_iter()
                .enumerate()
                .map(|(i, p)| (score(p), i)),
        );
        evaluations += cfg.population;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        if scored[0].0 > best.1 {
            best = (population[scored[0].1], scored[0].0);
        }
        let elites = &scored[..cfg.elite];
        let n = elites.len() as f64;
        for k in 0..NODE_COUNT {
            let m = elites
                .iter()
                .map(|&(_, i)| population[i].node_x()[k])
                .sum::<f64>()
                / n;
            let v = elites
                .iter()
                .map(|&(_, i)| (population[i].node_x()[k] - m).powi(2))
                .sum::<f64>()
                / n;
            let a = cfg.smoothing;
            mean[k] = a * m + (1.0 - a) * mean[k];
            let spread = (v + noise * noise).sqrt();
            sigma[k] = (a * spread + (1.0 - a) * sigma[k]).max(cfg.min_sigma);
        }
        noise *= cfg.noise_decay;
    }
    Ok(OracleResult {
        plan: best.0,
        reward: best.1,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyEvaluation {
    pub name: String,
    pub plan: PathPlan,
    pub metrics: PathMetrics,
    /// Reward of the mean-action plan.
    pub reward: f64,
    /// Average reward of `n_draws` sampled plans (NaN when `n_draws = 0`).
    pub sampled_reward: f64,
}

/// Score the policy's deterministic mean action on every scenario.
pub fn evaluate_policy(
    params: &PolicyParameters,
    suite: &ScenarioSuite,
    coeffs: &RewardCoefficients,
    n_draws: usize,
    seed: u64,
) -> Vec<PolicyEvaluation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    suite
        .scenarios
        .iter()
        .map(|named| {
            let scenario = named.scenario();
            let out = policy::forward(&observe(&scenario), params);
            let plan = policy::mean_plan(&out);
            let sampled_reward = if n_draws == 0 {
                f64::NAN
            } else {
                (0..n_draws)
                    .map(|_| {
                        let a = policy::sample_action(&out.mean, &out.log_std, &mut rng);
                        total_reward(&scenario, &a.plan, coeffs).total
                    })
                    .sum::<f64>()
                    / n_draws as f64
            };
            PolicyEvaluation {
                name: named.name.clone(),
                plan,
                metrics: PathMetrics::of_plan(&scenario, &plan, coeffs),
                reward: total_reward(&scenario, &plan, coeffs).total,
                sampled_reward,
            }
        })
        .collect()
}

/// Policy versus oracle on a suite, both measured as improvement over the
/// straight start→destination plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleComparison {
    pub policy_gain: f64,
    pub oracle_gain: f64,
}

impl OracleComparison {
    /// Share of the oracle's improvement recovered by the policy.
    pub fn ratio(&self) -> f64 {
        self.policy_gain / self.oracle_gain
    }
}

/// Mean-action reward of `params` and the oracle's reward on every scenario,
/// each shifted so the straight plan scores 0, averaged over the suite.
pub fn compare_with_oracle(
    params: &PolicyParameters,
    suite: &ScenarioSuite,
    coeffs: &RewardCoefficients,
    budget: usize,
    cem: &CemConfig,
) -> Result<OracleComparison> {
    let evals = evaluate_policy(params, suite, coeffs, 0, 0);
    let (mut policy_gain, mut oracle_gain) = (0.0, 0.0);
    for (named, eval) in suite.scenarios.iter().zip(&evals) {
        let scenario = named.scenario();
        let base = total_reward(&scenario, &PathPlan::straight(&scenario), coeffs).total;
        let oracle = reference_optimize(&scenario, coeffs, budget, cem)?;
        policy_gain += eval.reward - base;
        oracle_gain += oracle.reward - base;
    }
    let n = suite.len().max(1) as f64;
    Ok(OracleComparison {
        policy_gain: policy_gain / n,
        oracle_gain: oracle_gain / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Rl,
    Sfm,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Rl => "rl",
            Method::Sfm => "sfm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub method: Method,
    pub metrics: PathMetrics,
    pub total_reward: f64,
}

/// One scenario of a comparison, with the artefacts needed for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonCase {
    pub name: String,
    pub scenario: Scenario,
    pub plan: PathPlan,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    pub cases: Vec<ComparisonCase>,
}

/// Learned plan and social force trajectory for every scenario.
pub fn compare_sfm(
    suite: &ScenarioSuite,
    sfm_cfg: &SfmConfig,
    params: &PolicyParameters,
    coeffs: &RewardCoefficients,
) -> Result<ComparisonReport> {
    let evals = evaluate_policy(params, suite, coeffs, 0, 0);
    let mut report = ComparisonReport::default();
    for (named, eval) in suite.scenarios.iter().zip(evals) {
        let scenario = named.scenario();
        let trajectory = sfm::simulate(&scenario, sfm_cfg)?;
        let pts: Vec<Vec2> = trajectory.positions().collect();
        let sfm_plan = plan_from_trajectory(&trajectory);
        report.rows.push(ReportRow {
            scenario: named.name.clone(),
            method: Method::Rl,
            metrics: eval.metrics,
            total_reward: eval.reward,
        });
        report.rows.push(ReportRow {
            scenario: named.name.clone(),
            method: Method::Sfm,
            metrics: PathMetrics::of_polyline(&pts, scenario.obstacle.as_ref(), coeffs),
            total_reward: total_reward(&scenario, &sfm_plan, coeffs).total,
        });
        report.cases.push(ComparisonCase {
            name: named.name.clone(),
            scenario,
            plan: eval.plan,
            trajectory,
        });
    }
    Ok(report)
}

pub const METRICS_HEADER: &str =
    "scenario,method,total_length,max_turn_deg,min_clearance,left_fraction,boundary_violations,total_reward";

fn fmt_f(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{v:.6}")
    }
}

pub fn metrics_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.scenario,
            r.method.label(),
            fmt_f(m.total_length),
            fmt_f(m.max_turn_deg),
            fmt_f(m.min_clearance),
            fmt_f(m.left_fraction),
            m.boundary_violations,
            fmt_f(r.total_reward)
        );
    }
    s
}

const PX_PER_M: f64 = 20.0;
const MARGIN_PX: f64 = 20.0;

fn to_px(p: Vec2) -> (f64, f64) {
    (
        MARGIN_PX + (p.x + CORRIDOR_HALF_WIDTH) * PX_PER_M,
        MARGIN_PX + (DEST_Y - p.y) * PX_PER_M,
    )
}

/// Top-down drawing of the corridor, the obstacle (opacity follows danger),
/// the planned polyline and optionally a social force trajectory.
pub fn render_svg(
    scenario: &Scenario,
    plan: Option<&PathPlan>,
    trajectory: Option<&Trajectory>,
) -> String {
    let w = 2.0 * CORRIDOR_HALF_WIDTH * PX_PER_M + 2.0 * MARGIN_PX;
    let h = (DEST_Y - START_Y) * PX_PER_M + 2.0 * MARGIN_PX;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let (x0, y0) = to_px(Vec2::new(-CORRIDOR_HALF_WIDTH, DEST_Y));
    let _ = writeln!(
        s,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#f7f7f7" stroke="#333" stroke-width="2"/>"##,
        2.0 * CORRIDOR_HALF_WIDTH * PX_PER_M,
        (DEST_Y - START_Y) * PX_PER_M
    );
    if let Some(o) = &scenario.obstacle {
        let (cx, cy) = to_px(o.center);
        let _ = writeln!(
            s,
            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="#d62728" fill-opacity="{:.3}" stroke="#d62728"/>"##,
            o.radius * PX_PER_M,
            o.danger.clamp(0.05, 1.0)
        );
    }
    let polyline =
        |s: &mut String, pts: &mut dyn Iterator<Item = Vec2>, color: &str, dash: &str| {
            let coords: Vec<String> = pts
                .map(|p| {
                    let (x, y) = to_px(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                coords.join(" ")
            );
        };
    if let Some(t) = trajectory {
        polyline(
            &mut s,
            &mut t.positions(),
            "#ff7f0e",
            r#" stroke-dasharray="6 3""#,
        );
    }
    if let Some(p) = plan {
        polyline(&mut s, &mut p.polyline(scenario).into_iter(), "#1f77b4", "");
        for node in p.polyline(scenario) {
            let (x, y) = to_px(node);
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="#1f77b4"/>"##
            );
        }
    }
    for (p, fill) in [
        (scenario.start, "#2ca02c"),
        (scenario.destination, "#9467bd"),
    ] {
        let (x, y) = to_px(p);
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="{fill}"/>"#
        );
    }
    s.push_str("</svg>\n");
    s
}
