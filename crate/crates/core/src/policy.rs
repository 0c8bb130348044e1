//! Gaussian policy with a shared tanh trunk, a 10-dimensional mean head, a
//! state-independent log-std vector and a scalar value head.
//!
//! Actions are drawn in an unbounded "raw" space and squashed into the
//! corridor with `5 · tanh(raw)`. Log-densities carry the change-of-variables
//! correction so they are densities over plans.
//!
//! Gradients of the clipped PPO loss are derived by hand; see
//! [`backward`].

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Observation, CORRIDOR_HALF_WIDTH, OBS_DIM};
use crate::reward::{PathPlan, NODE_COUNT};

pub const ACTION_DIM: usize = NODE_COUNT;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const LOG_STD_INIT: f64 = -0.5;

/// Fixed per-feature scaling applied to observations before the trunk.
pub const INPUT_SCALE: [f64; OBS_DIM] = [0.2, 0.2, 1.0, 0.2, 0.1, 0.5, 1.0];

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

/// Rows per gradient chunk. Chunks are summed in order, so results do not
/// depend on the thread count.
const GRAD_CHUNK: usize = 64;

/// Flat parameter vector with a fixed layout:
/// `w1 [H×7] | b1 [H] | w2 [H×H] | b2 [H] | wm [10×H] | bm [10] | log_std [10] | wv [H] | bv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    hidden: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wm: usize,
    bm: usize,
    log_std: usize,
    wv: usize,
    bv: usize,
    len: usize,
}

impl Layout {
    fn new(h: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + h * OBS_DIM;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let wm = b2 + h;
        let bm = wm + ACTION_DIM * h;
        let log_std = bm + ACTION_DIM;
        let wv = log_std + ACTION_DIM;
        let bv = wv + h;
        Self {
            w1,
            b1,
            w2,
            b2,
            wm,
            bm,
            log_std,
            wv,
            bv,
            len: bv + 1,
        }
    }
}

impl PolicyParameters {
    pub fn param_count(hidden: usize) -> usize {
        Layout::new(hidden).len
    }

    /// Every weight and bias zero, log-std at its initial value.
    pub fn zeros(hidden: usize) -> Self {
        let mut p = Self {
            hidden,
            data: vec![0.0; Self::param_count(hidden)],
        };
        p.log_std_mut().fill(LOG_STD_INIT);
        p
    }

    /// Orthogonal init: gain √2 for the trunk, 0.01 for the mean head, 1 for
    /// the value head. Biases start at zero.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(hidden);
        let l = p.layout();
        let s2 = std::f64::consts::SQRT_2;
        orthogonal(&mut p.data[l.w1..l.b1], hidden, OBS_DIM, s2, &mut rng);
        orthogonal(&mut p.data[l.w2..l.b2], hidden, hidden, s2, &mut rng);
        orthogonal(&mut p.data[l.wm..l.bm], ACTION_DIM, hidden, 0.01, &mut rng);
        orthogonal(&mut p.data[l.wv..l.bv], 1, hidden, 1.0, &mut rng);
        p
    }

    pub(crate) fn from_raw(hidden: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == Self::param_count(hidden)).then_some(Self { hidden, data })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn layout(&self) -> Layout {
        Layout::new(self.hidden)
    }

    pub fn log_std(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.log_std..l.wv]
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        let l = self.layout();
        &mut self.data[l.log_std..l.wv]
    }

    /// Slice of the mean-head weights and biases.
    pub fn mean_head(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.wm..l.log_std]
    }

    pub fn clamp_log_std(&mut self) {
        for v in self.log_std_mut() {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Fill `w` (row-major, `rows × cols`) with an orthogonal matrix times `gain`.
fn orthogonal(w: &mut [f64], rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) {
    // Orthonormalise along the shorter dimension with modified Gram-Schmidt.
    let (n, m, transpose) = if rows <= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(b).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            w[r * cols + c] = gain * if transpose { basis[c][r] } else { basis[r][c] };
        }
    }
}

/// Head outputs for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    pub mean: [f64; ACTION_DIM],
    pub log_std: [f64; ACTION_DIM],
    pub value: f64,
}

struct Activations {
    x: [f64; OBS_DIM],
    h1: Vec<f64>,
    h2: Vec<f64>,
    out: PolicyOutput,
}

fn forward_cached(obs: &Observation, p: &PolicyParameters) -> Activations {
    let h = p.hidden;
    let l = p.layout();
    let d = &p.data;
    let mut x = [0.0; OBS_DIM];
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = obs.0[i] * INPUT_SCALE[i];
    }

    let mut h1 = vec![0.0; h];
    for (j, hj) in h1.iter_mut().enumerate() {
        let row = &d[l.w1 + j * OBS_DIM..l.w1 + (j + 1) * OBS_DIM];
        let z: f64 = row.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() + d[l.b1 + j];
        *hj = z.tanh();
    }
    let mut h2 = vec![0.0; h];
    for (j, hj) in h2.iter_mut().enumerate() {
        let row = &d[l.w2 + j * h..l.w2 + (j + 1) * h];
        let z: f64 = row.iter().zip(&h1).map(|(w, x)| w * x).sum::<f64>() + d[l.b2 + j];
        *hj = z.tanh();
    }

    let mut mean = [0.0; ACTION_DIM];
    for (k, m) in mean.iter_mut().enumerate() {
        let row = &d[l.wm + k * h..l.wm + (k + 1) * h];
        *m = row.iter().zip(&h2).map(|(w, x)| w * x).sum::<f64>() + d[l.bm + k];
    }
    let mut log_std = [0.0; ACTION_DIM];
    log_std.copy_from_slice(&d[l.log_std..l.wv]);
    let value = d[l.wv..l.bv]
        .iter()
        .zip(&h2)
        .map(|(w, x)| w * x)
        .sum::<f64>()
        + d[l.bv];

    Activations {
        x,
        h1,
        h2,
        out: PolicyOutput {
            mean,
            log_std,
            value,
        },
    }
}

pub fn forward(obs: &Observation, params: &PolicyParameters) -> PolicyOutput {
    forward_cached(obs, params).out
}

/// A drawn action in raw and squashed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    pub raw: [f64; ACTION_DIM],
    pub plan: PathPlan,
    pub log_prob: f64,
}

/// Largest node offset a squashed action can produce. `tanh` rounds to 1 for
/// |raw| above about 19, so the wall itself would otherwise be reachable.
pub const MAX_NODE_ABS: f64 = CORRIDOR_HALF_WIDTH - 1e-9;

pub fn squash(raw: &[f64; ACTION_DIM]) -> PathPlan {
    PathPlan::new(raw.map(|r| (CORRIDOR_HALF_WIDTH * r.tanh()).clamp(-MAX_NODE_ABS, MAX_NODE_ABS)))
}

/// Plan from the mean action.
pub fn mean_plan(out: &PolicyOutput) -> PathPlan {
    squash(&out.mean)
}

/// `log(1 - tanh(x)^2)`, evaluated without cancellation for large |x|.
fn log_one_minus_tanh_sq(x: f64) -> f64 {
    let a = x.abs();
    2.0 * (std::f64::consts::LN_2 - a - (-2.0 * a).exp().ln_1p())
}

/// Diagonal Gaussian log-density of `raw`, without the squash correction.
pub fn gaussian_log_prob(
    raw: &[f64; ACTION_DIM],
    mean: &[f64; ACTION_DIM],
    log_std: &[f64; ACTION_DIM],
) -> f64 {
    raw.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((r, m), ls)| {
            let z = (r - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LOG_2PI
        })
        .sum()
}

/// Log-density of the plan `5 · tanh(raw)` under the policy head.
pub fn log_prob_of(
    raw: &[f64; ACTION_DIM],
    mean: &[f64; ACTION_DIM],
    log_std: &[f64; ACTION_DIM],
) -> f64 {
    let correction: f64 = raw.iter().map(|&r| log_one_minus_tanh_sq(r)).sum();
    gaussian_log_prob(raw, mean, log_std)
        - correction
        - ACTION_DIM as f64 * CORRIDOR_HALF_WIDTH.ln()
}

pub fn sample_action<R: Rng + ?Sized>(
    mean: &[f64; ACTION_DIM],
    log_std: &[f64; ACTION_DIM],
    rng: &mut R,
) -> ActionSample {
    let mut raw = [0.0; ACTION_DIM];
    for i in 0..ACTION_DIM {
        let eps: f64 = rng.sample(StandardNormal);
        raw[i] = mean[i] + log_std[i].exp() * eps;
    }
    ActionSample {
        raw,
        plan: squash(&raw),
        log_prob: log_prob_of(&raw, mean, log_std),
    }
}

/// Differential entropy of the (pre-squash) Gaussian head.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 + HALF_LOG_2PI).sum()
}

/// `min(ρ·Â, clip(ρ, 1-ε, 1+ε)·Â)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantage;
    unclipped.min(clipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// One row of a training minibatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchRow {
    pub obs: Observation,
    pub raw: [f64; ACTION_DIM],
    pub advantage: f64,
    pub old_log_prob: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

struct Partial {
    grad: Vec<f64>,
    surrogate: f64,
    value_sq: f64,
    clipped: usize,
}

/// Gradient of the summed per-row terms for one chunk. `scale = 1 / batch`.
fn chunk_backward(
    rows: &[BatchRow],
    p: &PolicyParameters,
    cfg: &LossConfig,
    scale: f64,
) -> Partial {
    let h = p.hidden;
    let l = p.layout();
    let d = &p.data;
    let mut g = vec![0.0; l.len];
    let mut surrogate = 0.0;
    let mut value_sq = 0.0;
    let mut clipped = 0;
    let mut g_h2 = vec![0.0; h];
    let mut g_z1 = vec![0.0; h];

    for row in rows {
        let act = forward_cached(&row.obs, p);
        let out = &act.out;
        let lp = log_prob_of(&row.raw, &out.mean, &out.log_std);
        let ratio = (lp - row.old_log_prob).exp();
        let adv = row.advantage;
        let eps = cfg.clip_epsilon;
        let unclipped = ratio * adv;
        let clipped_obj = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        surrogate += unclipped.min(clipped_obj);
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }
        // d(-surrogate)/d(log_prob); zero once the clipped branch is active.
        let g_lp = if unclipped <= clipped_obj {
            -unclipped * scale
        } else {
            0.0
        };

        let verr = out.value - row.ret;
        value_sq += verr * verr;
        let g_v = 2.0 * cfg.value_coef * verr * scale;

        // Mean and log-std heads.
        let mut g_mean = [0.0; ACTION_DIM];
        for k in 0..ACTION_DIM {
            let inv_var = (-2.0 * out.log_std[k]).exp();
            let diff = row.raw[k] - out.mean[k];
            g_mean[k] = g_lp * diff * inv_var;
            g[l.log_std + k] += g_lp * (diff * diff * inv_var - 1.0);
        }

        g_h2.fill(0.0);
        for k in 0..ACTION_DIM {
            let gm = g_mean[k];
            g[l.bm + k] += gm;
            let w = &d[l.wm + k * h..l.wm + (k + 1) * h];
            let gw = &mut g[l.wm + k * h..l.wm + (k + 1) * h];
            for j in 0..h {
                gw[j] += gm * act.h2[j];
                g_h2[j] += gm * w[j];
            }
        }
        g[l.bv] += g_v;
        for j in 0..h {
            g[l.wv + j] += g_v * act.h2[j];
            g_h2[j] += g_v * d[l.wv + j];
        }

        // Second hidden layer.
        g_z1.fill(0.0);
        for j in 0..h {
            let gz = g_h2[j] * (1.0 - act.h2[j] * act.h2[j]);
            if gz == 0.0 {
                continue;
            }
            g[l.b2 + j] += gz;
            let w = &d[l.w2 + j * h..l.w2 + (j + 1) * h];
            let gw = &mut g[l.w2 + j * h..l.w2 + (j + 1) * h];
            for i in 0..h {
                gw[i] += gz * act.h1[i];
                g_z1[i] += gz * w[i];
            }
        }

        // First hidden layer.
        for i in 0..h {
            let gz = g_z1[i] * (1.0 - act.h1[i] * act.h1[i]);
            g[l.b1 + i] += gz;
            let gw = &mut g[l.w1 + i * OBS_DIM..l.w1 + (i + 1) * OBS_DIM];
            for (gwk, xk) in gw.iter_mut().zip(&act.x) {
                *gwk += gz * xk;
            }
        }
    }
    Partial {
        grad: g,
        surrogate,
        value_sq,
        clipped,
    }
}

/// PPO loss over a minibatch and its exact gradient with respect to every
/// parameter:
///
/// `loss = -mean(min(ρÂ, clip(ρ)Â)) + c_v·mean((V - R)²) - c_e·H`
///
/// with `ρ = exp(log π(raw) - old_log_prob)`. The entropy `H` of the
/// state-independent Gaussian is the same for every row.
pub fn backward(
    batch: &[BatchRow],
    params: &PolicyParameters,
    cfg: &LossConfig,
) -> (LossStats, Vec<f64>) {
    assert!(!batch.is_empty(), "empty batch");
    let scale = 1.0 / batch.len() as f64;
    let partials: Vec<Partial> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|rows| chunk_backward(rows, params, cfg, scale))
        .collect();

    let mut grad = vec![0.0; params.len()];
    let (mut surrogate, mut value_sq, mut clipped) = (0.0, 0.0, 0);
    for part in &partials {
        grad.iter_mut().zip(&part.grad).for_each(|(a, b)| *a += b);
        surrogate += part.surrogate;
        value_sq += part.value_sq;
        clipped += part.clipped;
    }

    let l = params.layout();
    for g in &mut grad[l.log_std..l.wv] {
        *g -= cfg.entropy_coef;
    }

    let ent = entropy(params.log_std());
    let policy_loss = -surrogate * scale;
    let value_loss = value_sq * scale;
    let stats = LossStats {
        loss: policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * ent,
        policy_loss,
        value_loss,
        entropy: ent,
        clip_fraction: clipped as f64 * scale,
    };
    (stats, grad)
}
