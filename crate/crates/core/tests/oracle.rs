//! Reference optimizer and evaluation harness.

use pedpath::env::{EnvConfig, Obstacle, Scenario, Vec2};
use pedpath::eval::{
    compare_sfm, evaluate_policy, reference_optimize, CemConfig, PathMetrics, ScenarioSuite,
    MIN_ORACLE_BUDGET,
};
use pedpath::policy::PolicyParameters;
use pedpath::reward::{collides, total_reward, PathPlan, RewardCoefficients};
use pedpath::sfm::{simulate, SfmConfig};
use proptest::prelude::*;

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    let obstacle = prop::option::of(
        (-5.0..5.0f64, -10.0..8.0f64, 0.5..2.0f64, 0.0..1.0f64).prop_map(|(x, y, r, d)| Obstacle {
            center: Vec2::new(x, y),
            radius: r,
            danger: d,
        }),
    );
    (-5.0..5.0f64, -5.0..5.0f64, obstacle).prop_map(|(s, d, o)| Scenario::new(s, d, o))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn larger_budget_never_does_worse(scenario in scenario_strategy(), seed in 0u64..100) {
        let coeffs = RewardCoefficients::default();
        let cem = CemConfig { seed, ..Default::default() };
        let small = reference_optimize(&scenario, &coeffs, MIN_ORACLE_BUDGET, &cem).unwrap();
        let large = reference_optimize(&scenario, &coeffs, 2 * MIN_ORACLE_BUDGET, &cem).unwrap();
        prop_assert!(large.reward >= small.reward);
        prop_assert!(large.evaluations <= 2 * MIN_ORACLE_BUDGET);
        let center = total_reward(&scenario, &PathPlan::center(), &coeffs).total;
        prop_assert!(small.reward >= center);
        prop_assert_eq!(total_reward(&scenario, &small.plan, &coeffs).total, small.reward);
    }
}

#[test]
fn shortest_path_only_recovers_straight_line() {
    let coeffs = RewardCoefficients::default().with_kappa([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    for c in [-3.0, 0.0, 1.7] {
        let scenario = Scenario::new(c, c, None);
        // Dense grid over vertical lines x = g.
        let best_g = (-5000..=5000)
            .map(|i| i as f64 * 1e-3)
            .max_by(|a, b| {
                let ra = total_reward(&scenario, &PathPlan::new([*a; 10]), &coeffs).total;
                let rb = total_reward(&scenario, &PathPlan::new([*b; 10]), &coeffs).total;
                ra.total_cmp(&rb)
            })
            .unwrap();
        let result = reference_optimize(&scenario, &coeffs, 20_000, &CemConfig::default()).unwrap();
        let err = result
            .plan
            .node_x()
            .iter()
            .map(|x| (x - best_g).abs())
            .fold(0.0, f64::max);
        assert!(
            err < 0.05,
            "c = {c}: grid {best_g}, plan {:?}",
            result.plan.node_x()
        );
    }
}

#[test]
fn obstacle_only_reward_saturates_away_from_far_obstacle() {
    let coeffs = RewardCoefficients::default().with_kappa([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let o = Obstacle {
        center: Vec2::new(4.5, 6.0),
        radius: 0.5,
        danger: 0.8,
    };
    let scenario = Scenario::new(-2.0, -2.0, Some(o));
    let result =
        reference_optimize(&scenario, &coeffs, MIN_ORACLE_BUDGET, &CemConfig::default()).unwrap();
    let ceiling = 0.01 * o.danger * o.danger * coeffs.sample_count as f64;
    assert!((result.reward - ceiling).abs() < 1e-12);
    assert!(!collides(&scenario, &result.plan, coeffs.sample_count));
}

#[test]
fn budget_below_minimum_is_rejected() {
    let s = Scenario::new(0.0, 0.0, None);
    let r = reference_optimize(
        &s,
        &RewardCoefficients::default(),
        MIN_ORACLE_BUDGET - 1,
        &CemConfig::default(),
    );
    assert!(r.is_err());
}

#[test]
fn zero_policy_plans_center_line() {
    let suite = ScenarioSuite::random(16, &EnvConfig::default(), 3);
    let coeffs = RewardCoefficients::default();
    let evals = evaluate_policy(&PolicyParameters::zeros(16), &suite, &coeffs, 0, 0);
    for (named, e) in suite.scenarios.iter().zip(&evals) {
        assert_eq!(e.plan, PathPlan::center());
        assert_eq!(
            e.reward,
            total_reward(&named.scenario(), &PathPlan::center(), &coeffs).total
        );
        assert!(e.sampled_reward.is_nan());
    }
}

#[test]
fn metrics_are_pure_and_bounded() {
    let suite = ScenarioSuite::random(32, &EnvConfig::default(), 9);
    let coeffs = RewardCoefficients::default();
    let params = PolicyParameters::init(16, 4);
    let a = evaluate_policy(&params, &suite, &coeffs, 4, 1);
    let b = evaluate_policy(&params, &suite, &coeffs, 4, 1);
    assert_eq!(a, b);
    for (named, e) in suite.scenarios.iter().zip(&a) {
        assert_eq!(
            e.metrics,
            PathMetrics::of_plan(&named.scenario(), &e.plan, &coeffs)
        );
        assert!(e.metrics.total_length >= 22.0 - 1e-12);
        assert!((0.0..=1.0).contains(&e.metrics.left_fraction));
    }
}

#[test]
fn empty_suite_gives_empty_report() {
    let report = compare_sfm(
        &ScenarioSuite::default(),
        &SfmConfig::default(),
        &PolicyParameters::zeros(8),
        &RewardCoefficients::default(),
    )
    .unwrap();
    assert!(report.rows.is_empty() && report.cases.is_empty());
}

#[test]
fn canonical_suite_round_trips_through_json() {
    let suite = ScenarioSuite::canonical();
    assert_eq!(suite.len(), 4);
    assert_eq!(ScenarioSuite::from_json(&suite.to_json()).unwrap(), suite);
    let on_disk = include_str!("../../../suites/canonical.json");
    assert_eq!(ScenarioSuite::from_json(on_disk).unwrap(), suite);
}

#[test]
fn halving_sfm_step_keeps_peak_deviation() {
    for named in ScenarioSuite::canonical().scenarios {
        let scenario = named.scenario();
        let cfg = SfmConfig::default();
        let fine = SfmConfig {
            dt: cfg.dt / 2.0,
            max_steps: 2 * cfg.max_steps,
            ..cfg.clone()
        };
        let a = simulate(&scenario, &cfg).unwrap().max_abs_x();
        let b = simulate(&scenario, &fine).unwrap().max_abs_x();
        if a.max(b) < 1e-6 {
            continue;
        }
        assert!(
            (a - b).abs() < 0.05 * a.max(b),
            "{}: {a} vs {b}",
            named.name
        );
    }
}
