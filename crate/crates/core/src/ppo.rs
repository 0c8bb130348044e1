//! PPO for one-step episodes.
//!
//! Every episode is: observe the scenario, sample a whole plan, score it,
//! advance the reset rule. With a single step the return is the reward and
//! the advantage is `reward - V(s)`, normalised per buffer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{observe, EnvConfig, EnvWorker, Observation};
use crate::error::{Error, Result};
use crate::policy::{self, BatchRow, LossConfig, LossStats, PolicyParameters, ACTION_DIM};
use crate::reward::{collides, total_reward, RewardCoefficients};

/// Stream offset separating policy-sampling streams from scenario streams.
const SAMPLER_STREAM_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub buffer_size: usize,
    pub learning_rate: f64,
    /// Number of one-step episodes to collect in total.
    pub total_steps: usize,
    pub n_envs: usize,
    pub clip_epsilon: f64,
    pub epochs_per_buffer: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Global gradient-norm clip; 0 disables it.
    pub max_grad_norm: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            buffer_size: 5120,
            learning_rate: 1e-3,
            total_steps: 200_000,
            n_envs: 10,
            clip_epsilon: 0.2,
            epochs_per_buffer: 10,
            value_coef: 0.05,
            entropy_coef: 1e-3,
            max_grad_norm: 0.5,
            hidden: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Settings for long runs: 3M episodes in large buffers.
    pub fn long_run() -> Self {
        Self {
            batch_size: 20_480,
            buffer_size: 204_800,
            learning_rate: 1.5e-3,
            total_steps: 3_000_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 || self.buffer_size == 0 || self.n_envs == 0 || self.hidden == 0 {
            return bad("train.batch_size, buffer_size, n_envs and hidden must be positive".into());
        }
        if !self.buffer_size.is_multiple_of(self.batch_size) {
            return bad(format!(
                "train.buffer_size {} is not a multiple of batch_size {}",
                self.buffer_size, self.batch_size
            ));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad(format!(
                "train.clip_epsilon {} outside (0, 1)",
                self.clip_epsilon
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("train.learning_rate must be positive".into());
        }
        for (k, v) in [
            ("value_coef", self.value_coef),
            ("entropy_coef", self.entropy_coef),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("train.{k} must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub raw_action: [f64; ACTION_DIM],
    pub reward: f64,
    pub old_log_prob: f64,
    pub old_value: f64,
    pub collided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Episodes collected so far.
    pub step: usize,
    pub mean_reward: f64,
    pub loss: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingCurve(pub Vec<CurvePoint>);

impl TrainingCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,mean_reward,loss,clip_fraction\n");
        for p in &self.0 {
            s.push_str(&format!(
                "{},{:.9},{:.9},{:.6}\n",
                p.step, p.mean_reward, p.loss, p.clip_fraction
            ));
        }
        s
    }
}

/// One environment copy together with its action-sampling stream.
#[derive(Debug, Clone)]
pub struct RolloutWorker {
    pub env: EnvWorker,
    rng: ChaCha8Rng,
}

impl RolloutWorker {
    pub fn new(env_cfg: &EnvConfig, seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(SAMPLER_STREAM_OFFSET + index);
        Self {
            env: EnvWorker::new(env_cfg, index),
            rng,
        }
    }

    fn episode(&mut self, params: &PolicyParameters, coeffs: &RewardCoefficients) -> Transition {
        let scenario = *self.env.scenario();
        let obs = observe(&scenario);
        let out = policy::forward(&obs, params);
        let action = policy::sample_action(&out.mean, &out.log_std, &mut self.rng);
        let reward = total_reward(&scenario, &action.plan, coeffs).total;
        let collided = collides(&scenario, &action.plan, coeffs.sample_count);
        self.env.advance(collided);
        Transition {
            obs,
            raw_action: action.raw,
            reward,
            old_log_prob: action.log_prob,
            old_value: out.value,
            collided,
        }
    }
}

/// A pool of rollout workers, one per environment copy.
pub fn worker_pool(env_cfg: &EnvConfig, seed: u64, n_envs: usize) -> Vec<RolloutWorker> {
    (0..n_envs as u64)
        .map(|i| RolloutWorker::new(env_cfg, seed, i))
        .collect()
}

/// Collect `count` one-step episodes. Workers run in parallel; worker `i`
/// contributes a contiguous block and blocks are concatenated by index.
pub fn collect_buffer(
    params: &PolicyParameters,
    workers: &mut [RolloutWorker],
    coeffs: &RewardCoefficients,
    count: usize,
) -> Vec<Transition> {
    let n = workers.len();
    let blocks: Vec<Vec<Transition>> = workers
        .par_iter_mut()
        .enumerate()
        .map(|(i, w)| {
            let quota = count / n + usize::from(i < count % n);
            (0..quota).map(|_| w.episode(params, coeffs)).collect()
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

/// Raw advantages `reward - old_value`.
pub fn raw_advantages(buffer: &[Transition]) -> Vec<f64> {
    buffer.iter().map(|t| t.reward - t.old_value).collect()
}

/// Normalised advantages and returns for a buffer of one-step episodes.
pub fn compute_advantages(buffer: &[Transition]) -> (Vec<f64>, Vec<f64>) {
    assert!(!buffer.is_empty(), "empty buffer");
    let mut adv = raw_advantages(buffer);
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + 1e-8;
    adv.iter_mut().for_each(|a| *a = (*a - mean) / denom);
    let returns = buffer.iter().map(|t| t.reward).collect();
    (adv, returns)
}

/// Loss and gradient for a minibatch.
pub fn ppo_loss(
    batch: &[BatchRow],
    params: &PolicyParameters,
    cfg: &LossConfig,
) -> (LossStats, Vec<f64>) {
    policy::backward(batch, params, cfg)
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Apply one descent step; returns the L2 norm of the update.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> f64 {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let mut norm_sq = 0.0;
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            let delta = self.lr * m_hat / (v_hat.sqrt() + self.eps);
            params[i] -= delta;
            norm_sq += delta * delta;
        }
        norm_sq.sqrt()
    }
}

fn clip_grad_norm(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Run PPO. `on_update` is called after every buffer with the new curve
/// point and the current parameters (for periodic checkpoints).
pub fn train(
    cfg: &TrainConfig,
    env_cfg: &EnvConfig,
    coeffs: &RewardCoefficients,
    mut on_update: impl FnMut(&CurvePoint, &PolicyParameters),
) -> Result<(PolicyParameters, TrainingCurve)> {
    cfg.validate()?;
    let mut params = PolicyParameters::init(cfg.hidden, cfg.seed);
    let mut curve = TrainingCurve::default();
    let mut workers = worker_pool(env_cfg, cfg.seed, cfg.n_envs);
    let mut optimizer = Adam::new(params.len(), cfg.learning_rate);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let loss_cfg = cfg.loss_config();

    let mut step = 0;
    while step < cfg.total_steps {
        let count = cfg.buffer_size.min(cfg.total_steps - step);
        let buffer = collect_buffer(&params, &mut workers, coeffs, count);
        step += buffer.len();
        let (adv, returns) = compute_advantages(&buffer);
        let rows: Vec<BatchRow> = buffer
            .iter()
            .zip(adv.iter().zip(&returns))
            .map(|(t, (&advantage, &ret))| BatchRow {
                obs: t.obs,
                raw: t.raw_action,
                advantage,
                old_log_prob: t.old_log_prob,
                ret,
            })
            .collect();

        let mut order: Vec<usize> = (0..rows.len()).collect();
        let (mut loss_sum, mut clip_sum, mut batches) = (0.0, 0.0, 0usize);
        let mut minibatch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.epochs_per_buffer {
            order.shuffle(&mut shuffle_rng);
            for chunk in order.chunks(cfg.batch_size) {
                minibatch.clear();
                minibatch.extend(chunk.iter().map(|&i| rows[i]));
                let (stats, mut grad) = ppo_loss(&minibatch, &params, &loss_cfg);
                if !stats.loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFiniteLoss { step });
                }
                clip_grad_norm(&mut grad, cfg.max_grad_norm);
                optimizer.step(params.as_mut_slice(), &grad);
                params.clamp_log_std();
                loss_sum += stats.loss;
                clip_sum += stats.clip_fraction;
                batches += 1;
            }
        }

        let mean_reward = buffer.iter().map(|t| t.reward).sum::<f64>() / buffer.len() as f64;
        let point = CurvePoint {
            step,
            mean_reward,
            loss: loss_sum / batches.max(1) as f64,
            clip_fraction: clip_sum / batches.max(1) as f64,
        };
        curve.0.push(point);
        on_update(&point, &params);
    }
    Ok((params, curve))
}
