//! Finite-difference helpers shared by the gradient tests.

use pedpath::env::Observation;
use pedpath::policy::{self, backward, BatchRow, LossConfig, PolicyParameters, ACTION_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random batch whose probability ratios stay away from the clip edges, so
/// the loss is smooth where it is probed.
pub fn random_batch(
    params: &PolicyParameters,
    rows: usize,
    cfg: &LossConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<BatchRow> {
    (0..rows)
        .map(|_| {
            let obs = Observation([
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                1.0,
                rng.random_range(-5.0..5.0),
                rng.random_range(2.0..20.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..1.0),
            ]);
            let out = policy::forward(&obs, params);
            let raw: [f64; ACTION_DIM] = std::array::from_fn(|k| {
                out.mean[k] + out.log_std[k].exp() * rng.random_range(-1.5..1.5)
            });
            let lp = policy::log_prob_of(&raw, &out.mean, &out.log_std);
            // Half the rows inside the trust region, half clipped.
            let shift = loop {
                let s: f64 = rng.random_range(-0.6..0.6);
                let ratio = s.exp();
                let eps = cfg.clip_epsilon;
                if ((ratio - (1.0 - eps)).abs() > 0.02) && ((ratio - (1.0 + eps)).abs() > 0.02) {
                    break s;
                }
            };
            BatchRow {
                obs,
                raw,
                advantage: rng.random_range(-2.0..2.0),
                old_log_prob: lp - shift,
                ret: out.value + rng.random_range(-1.0..1.0),
            }
        })
        .collect()
}

fn loss_at(params: &PolicyParameters, batch: &[BatchRow], cfg: &LossConfig) -> f64 {
    backward(batch, params, cfg).0.loss
}

/// Max elementwise relative error, with a floor on the denominator so
/// parameters with vanishing gradient are compared absolutely.
pub fn max_relative_error(params: &PolicyParameters, batch: &[BatchRow], cfg: &LossConfig) -> f64 {
    let (_, analytic) = backward(batch, params, cfg);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut p = params.clone();
    for (i, &a) in analytic.iter().enumerate() {
        let orig = p.as_slice()[i];
        p.as_mut_slice()[i] = orig + h;
        let up = loss_at(&p, batch, cfg);
        p.as_mut_slice()[i] = orig - h;
        let down = loss_at(&p, batch, cfg);
        p.as_mut_slice()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

pub fn random_params(hidden: usize, seed: u64) -> PolicyParameters {
    let mut p = PolicyParameters::init(hidden, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    // Break the tiny-head initialisation so every layer carries gradient.
    for v in p.as_mut_slice() {
        *v += rng.random_range(-0.3..0.3);
    }
    for v in p.log_std_mut() {
        *v = rng.random_range(-1.0..0.5);
    }
    p
}
