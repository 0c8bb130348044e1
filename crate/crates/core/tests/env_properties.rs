use pedpath::env::{
    advance_reset, new_scenario, observe, EnvConfig, EnvWorker, ResetState, Scenario,
    CORRIDOR_HALF_WIDTH,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn generated_scenarios_are_valid() {
    let cfg = EnvConfig::default();
    for seed in 0..100_000u64 {
        let s = new_scenario(&mut ChaCha8Rng::seed_from_u64(seed), &cfg);
        s.validate().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(s.start.x.abs() <= CORRIDOR_HALF_WIDTH);
    }
}

#[test]
fn obstacle_frequency_within_three_sigma() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| new_scenario(&mut rng, &cfg).obstacle.is_some())
        .count() as f64;
    let p = cfg.p_obs;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!(
        (hits - n as f64 * p).abs() <= 3.0 * sigma,
        "{hits} obstacles in {n} draws"
    );
}

#[test]
fn extreme_presence_probabilities() {
    for (p, want) in [(0.0, false), (1.0, true)] {
        let cfg = EnvConfig {
            p_obs: p,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| new_scenario(&mut rng, &cfg).obstacle.is_some() == want));
    }
}

#[test]
fn workers_draw_distinct_streams() {
    let cfg = EnvConfig::default();
    let a = EnvWorker::new(&cfg, 0);
    let b = EnvWorker::new(&cfg, 1);
    assert_ne!(a.scenario(), b.scenario());
    assert_eq!(a.scenario(), EnvWorker::new(&cfg, 0).scenario());
}

proptest! {
    #[test]
    fn observe_is_pure(seed in any::<u64>()) {
        let s = new_scenario(&mut ChaCha8Rng::seed_from_u64(seed), &EnvConfig::default());
        prop_assert_eq!(observe(&s), observe(&s));
        prop_assert!(observe(&s).0.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn retention_never_exceeds_limit(
        limit in 0u32..12,
        collisions in prop::collection::vec(prop::bool::weighted(0.9), 1..200),
        seed in any::<u64>(),
    ) {
        let cfg = EnvConfig { retain_limit: limit, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = ResetState::new(Scenario::new(0.0, 0.0, None), limit);
        let mut run = 0u32;
        for collided in collisions {
            let before = state.current;
            state = advance_reset(state, collided, &mut rng, &cfg);
            prop_assert!(state.retained <= limit);
            if collided && run < limit {
                run += 1;
                prop_assert_eq!(state.current, before);
            } else {
                run = 0;
            }
            prop_assert_eq!(state.retained, run);
        }
    }
}
