//! Soft actor-critic with fixed temperature: squashed-Gaussian policy, twin
//! critics with soft-updated targets, a ring replay buffer and Adam. Networks
//! are small dense maps with hand-written backpropagation in `f64`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const CHECKPOINT_VERSION: u32 = 1;
const LN_2PI: f64 = 1.837_877_066_409_345_3;
const ACTION_CLIP: f64 = 1.0 - 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SacError {
    #[error("invalid sac config: {0}")]
    InvalidConfig(String),
    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    NotEnoughData { have: usize, need: usize },
    #[error("non-finite {what} after update {step}")]
    NonFinite { what: &'static str, step: u64 },
    #[error("checkpoint version {found} is newer than supported {supported}")]
    Version { found: u32, supported: u32 },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn label(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn from_label(s: &str) -> Option<Activation> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `h`.
    fn grad_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Dense feed-forward map with a linear output layer. Parameters are stored
/// flat, layer by layer: row-major weights (`out x in`) then biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

/// Layer outputs from a forward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn zeros(sizes: &[usize], activation: Activation) -> Mlp {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes");
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Mlp {
            sizes: sizes.to_vec(),
            activation,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights and zero biases; the output layer is drawn from
    /// `U(-s, s)` instead when `output_scale` is given.
    pub fn init<R: Rng>(sizes: &[usize], activation: Activation, output_scale: Option<f64>, rng: &mut R) -> Mlp {
        let mut net = Mlp::zeros(sizes, activation);
        let layers = sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = match output_scale {
                Some(s) if l + 1 == layers => s,
                _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = rng.gen_range(-limit..=limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).acts.pop().expect("non-empty")
    }

    pub fn forward_cached(&self, x: &[f64]) -> MlpCache {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = &acts[l];
            let mut out = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                out.push(if l + 1 < layers { self.activation.apply(z) } else { z });
            }
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        MlpCache { acts }
    }

    /// Accumulates `dL/dparams` into `grad` and returns `dL/dinput`, given
    /// `dL/doutput`.
    pub fn backward(&self, cache: &MlpCache, gout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.params.len(), "gradient buffer");
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut g = gout.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < layers {
                for (gi, h) in g.iter_mut().zip(&cache.acts[l + 1]) {
                    *gi *= self.activation.grad_from_output(*h);
                }
            }
            let off = offsets[l];
            let input = &cache.acts[l];
            let mut gin = vec![0.0; n_in];
            for o in 0..n_out {
                let go = g[o];
                let wrow = off + o * n_in;
                for i in 0..n_in {
                    grad[wrow + i] += go * input[i];
                    gin[i] += self.params[wrow + i] * go;
                }
                grad[off + n_in * n_out + o] += go;
            }
            g = gin;
        }
        g
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Gaussian over pre-squash actions; the trunk outputs means then raw log-stds.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub act_dim: usize,
}

impl GaussianPolicy {
    pub fn new(net: Mlp) -> Result<GaussianPolicy, SacError> {
        let out = net.output_dim();
        if out % 2 != 0 {
            return Err(SacError::Shape(format!("policy output {out} is not 2 x action dim")));
        }
        Ok(GaussianPolicy { net, act_dim: out / 2 })
    }

    /// Mean and clamped log-std for `state`.
    pub fn distribution(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let out = self.net.forward(state);
        split_head(&out, self.act_dim)
    }
}

fn split_head(out: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mean = out[..d].to_vec();
    let log_std = out[d..].iter().map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
    (mean, log_std)
}

/// `log(1 - tanh(u)^2)` without cancellation.
fn log1m_tanh2(u: f64) -> f64 {
    let u = u.abs();
    2.0 * (std::f64::consts::LN_2 - u - (-2.0 * u).exp().ln_1p())
}

fn gaussian_log_density(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    u.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((u, m), ls)| {
            let z = (u - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Log-density of a squashed action: Gaussian density of `atanh(a)` minus
/// `sum log(1 - a^2)`. Components are clipped to `1 - 1e-6` in magnitude.
pub fn log_prob_squashed(policy: &GaussianPolicy, state: &[f64], action: &[f64]) -> f64 {
    let (mean, log_std) = policy.distribution(state);
    let u: Vec<f64> = action.iter().map(|a| a.signum() * a.abs().min(ACTION_CLIP).atanh()).collect();
    gaussian_log_density(&u, &mean, &log_std) - u.iter().map(|&u| log1m_tanh2(u)).sum::<f64>()
}

/// `tanh(mean)` when deterministic, else `tanh(mean + std * eps)`.
pub fn sample_action<R: Rng>(policy: &GaussianPolicy, state: &[f64], deterministic: bool, rng: &mut R) -> Vec<f64> {
    let (mean, log_std) = policy.distribution(state);
    if deterministic {
        return mean.iter().map(|m| m.tanh()).collect();
    }
    mean.iter()
        .zip(&log_std)
        .map(|(m, ls)| {
            let eps: f64 = StandardNormal.sample(rng);
            (m + ls.exp() * eps).tanh()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinCritic {
    pub q1: Mlp,
    pub q2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
}

impl TwinCritic {
    pub fn new(q1: Mlp, q2: Mlp) -> TwinCritic {
        TwinCritic {
            target1: q1.clone(),
            target2: q2.clone(),
            q1,
            q2,
        }
    }

    /// `target <- (1 - tau) target + tau main`, written as `target + tau (main - target)`.
    pub fn soft_update(&mut self, tau: f64) {
        for (t, m) in [(&mut self.target1, &self.q1), (&mut self.target2, &self.q2)] {
            if tau == 1.0 {
                t.params.copy_from_slice(&m.params);
                continue;
            }
            for (tp, mp) in t.params.iter_mut().zip(&m.params) {
                *tp += tau * (mp - *tp);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s2: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, overwriting the oldest item once full.
    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// `n` items drawn uniformly with replacement.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Experience>, SacError> {
        if self.items.len() < n || self.items.is_empty() {
            return Err(SacError::NotEnoughData {
                have: self.items.len(),
                need: n,
            });
        }
        Ok((0..n).map(|_| self.items[rng.gen_range(0..self.items.len())].clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Half-width of the uniform init of each network's output layer.
    pub output_init_scale: f64,
    pub seed: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.05,
            tau: 0.005,
            lr: 3e-4,
            batch_size: 256,
            buffer_capacity: 100_000,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            output_init_scale: 3e-3,
            seed: 0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        let bad = |m: &str| Err(SacError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad("alpha must be > 0");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("lr must be >= 0");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be >= 1");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden sizes must be >= 1");
        }
        if !(self.output_init_scale > 0.0) || !self.output_init_scale.is_finite() {
            return bad("output_init_scale must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - self.beta2.powi(self.t.min(i32::MAX as u64) as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Standard-normal draws used by one update, kept explicit so losses are
/// deterministic functions of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateNoise {
    /// For the next-state actions in the critic target.
    pub next: Vec<Vec<f64>>,
    /// For the reparameterized actions in the actor loss.
    pub current: Vec<Vec<f64>>,
}

impl UpdateNoise {
    pub fn sample<R: Rng>(batch: usize, act_dim: usize, rng: &mut R) -> UpdateNoise {
        let mut draw = || -> Vec<Vec<f64>> {
            (0..batch)
                .map(|_| (0..act_dim).map(|_| StandardNormal.sample(&mut *rng)).collect())
                .collect()
        };
        let next = draw();
        let current = draw();
        UpdateNoise { next, current }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// `-mean log pi` over the batch.
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub cfg: SacConfig,
    pub policy: GaussianPolicy,
    pub critics: TwinCritic,
    opt_policy: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    pub updates: u64,
}

/// Result of the squashed reparameterized sample for one state.
struct ActorSample {
    action: Vec<f64>,
    u: Vec<f64>,
    std: Vec<f64>,
    log_prob: f64,
}

fn squashed_sample(mean: &[f64], log_std: &[f64], eps: &[f64]) -> ActorSample {
    let std: Vec<f64> = log_std.iter().map(|l| l.exp()).collect();
    let u: Vec<f64> = (0..mean.len()).map(|j| mean[j] + std[j] * eps[j]).collect();
    let action = u.iter().map(|u| u.tanh()).collect();
    let log_prob = (0..mean.len())
        .map(|j| -0.5 * eps[j] * eps[j] - log_std[j] - 0.5 * LN_2PI - log1m_tanh2(u[j]))
        .sum();
    ActorSample {
        action,
        u,
        std,
        log_prob,
    }
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

impl Agent {
    pub fn new<R: Rng>(obs_dim: usize, act_dim: usize, cfg: SacConfig, rng: &mut R) -> Result<Agent, SacError> {
        cfg.validate()?;
        let mut psizes = vec![obs_dim];
        psizes.extend(&cfg.hidden);
        psizes.push(2 * act_dim);
        let mut qsizes = vec![obs_dim + act_dim];
        qsizes.extend(&cfg.hidden);
        qsizes.push(1);
        let scale = Some(cfg.output_init_scale);
        let policy = GaussianPolicy::new(Mlp::init(&psizes, cfg.activation, scale, rng))?;
        let q1 = Mlp::init(&qsizes, cfg.activation, scale, rng);
        let q2 = Mlp::init(&qsizes, cfg.activation, scale, rng);
        Ok(Agent::from_parts(cfg, policy, TwinCritic::new(q1, q2)))
    }

    pub fn from_parts(cfg: SacConfig, policy: GaussianPolicy, critics: TwinCritic) -> Agent {
        Agent {
            opt_policy: Adam::new(policy.net.params.len(), cfg.lr),
            opt_q1: Adam::new(critics.q1.params.len(), cfg.lr),
            opt_q2: Adam::new(critics.q2.params.len(), cfg.lr),
            cfg,
            policy,
            critics,
            updates: 0,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.net.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.act_dim
    }

    /// `y = r + gamma (1 - done) (min(Q1', Q2')(s', a') - alpha log pi(a'|s'))`
    /// with `a'` drawn from the current policy using `noise_next`. Only target
    /// critics are evaluated.
    pub fn critic_targets(&self, batch: &[Experience], noise_next: &[Vec<f64>]) -> Vec<f64> {
        let (gamma, alpha) = (self.cfg.gamma, self.cfg.alpha);
        batch
            .iter()
            .zip(noise_next)
            .map(|(e, eps)| {
                if e.done {
                    return e.r;
                }
                let (mean, log_std) = self.policy.distribution(&e.s2);
                let smp = squashed_sample(&mean, &log_std, eps);
                let x = concat(&e.s2, &smp.action);
                let q = self.critics.target1.forward(&x)[0].min(self.critics.target2.forward(&x)[0]);
                e.r + gamma * (q - alpha * smp.log_prob)
            })
            .collect()
    }

    /// Mean squared error of both heads against `y`, with gradients for each head.
    pub fn critic_loss_grad(&self, batch: &[Experience], y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = batch.len() as f64;
        let mut g1 = vec![0.0; self.critics.q1.params.len()];
        let mut g2 = vec![0.0; self.critics.q2.params.len()];
        let mut loss = 0.0;
        for (e, &y) in batch.iter().zip(y) {
            let x = concat(&e.s, &e.a);
            for (net, g) in [(&self.critics.q1, &mut g1), (&self.critics.q2, &mut g2)] {
                let c = net.forward_cached(&x);
                let d = c.acts.last().expect("output")[0] - y;
                loss += d * d / n;
                net.backward(&c, &[2.0 * d / n], g);
            }
        }
        (loss, g1, g2)
    }

    /// `mean(alpha log pi(a|s) - min(Q1, Q2)(s, a))` with `a` reparameterized
    /// through `noise`. Returns the loss, the policy gradient and the entropy
    /// estimate `-mean log pi`.
    pub fn actor_loss_grad(&self, batch: &[Experience], noise: &[Vec<f64>]) -> (f64, Vec<f64>, f64) {
        let n = batch.len() as f64;
        let alpha = self.cfg.alpha;
        let d = self.act_dim();
        let mut grad = vec![0.0; self.policy.net.params.len()];
        let mut scratch1 = vec![0.0; self.critics.q1.params.len()];
        let mut scratch2 = vec![0.0; self.critics.q2.params.len()];
        let (mut loss, mut logp_sum) = (0.0, 0.0);
        for (e, eps) in batch.iter().zip(noise) {
            let pc = self.policy.net.forward_cached(&e.s);
            let raw = pc.acts.last().expect("output");
            let (mean, log_std) = split_head(raw, d);
            let smp = squashed_sample(&mean, &log_std, eps);
            let x = concat(&e.s, &smp.action);
            let c1 = self.critics.q1.forward_cached(&x);
            let c2 = self.critics.q2.forward_cached(&x);
            let (v1, v2) = (c1.acts.last().expect("output")[0], c2.acts.last().expect("output")[0]);
            loss += (alpha * smp.log_prob - v1.min(v2)) / n;
            logp_sum += smp.log_prob;
            let gx = if v1 <= v2 {
                self.critics.q1.backward(&c1, &[-1.0 / n], &mut scratch1)
            } else {
                self.critics.q2.backward(&c2, &[-1.0 / n], &mut scratch2)
            };
            let mut gout = vec![0.0; 2 * d];
            for j in 0..d {
                let a = smp.action[j];
                let du = gx[e.s.len() + j] * (1.0 - a * a) + alpha / n * 2.0 * smp.u[j].tanh();
                gout[j] = du;
                let clamped = raw[d + j] < LOG_STD_MIN || raw[d + j] > LOG_STD_MAX;
                gout[d + j] = if clamped { 0.0 } else { du * smp.std[j] * eps[j] - alpha / n };
            }
            self.policy.net.backward(&pc, &gout, &mut grad);
        }
        (loss, grad, -logp_sum / n)
    }

    /// One gradient step on both critics and the policy from a fixed batch and
    /// noise, then a soft target update. All gradients are taken at the
    /// pre-update parameters.
    pub fn update_with(&mut self, batch: &[Experience], noise: &UpdateNoise) -> Result<LossReport, SacError> {
        let y = self.critic_targets(batch, &noise.next);
        let (critic_loss, g1, g2) = self.critic_loss_grad(batch, &y);
        let (actor_loss, gp, entropy) = self.actor_loss_grad(batch, &noise.current);
        let step = self.updates;
        if !critic_loss.is_finite() {
            return Err(SacError::NonFinite {
                what: "critic loss",
                step,
            });
        }
        if !actor_loss.is_finite() {
            return Err(SacError::NonFinite {
                what: "actor loss",
                step,
            });
        }
        self.opt_q1.lr = self.cfg.lr;
        self.opt_q2.lr = self.cfg.lr;
        self.opt_policy.lr = self.cfg.lr;
        self.opt_q1.step(&mut self.critics.q1.params, &g1);
        self.opt_q2.step(&mut self.critics.q2.params, &g2);
        self.opt_policy.step(&mut self.policy.net.params, &gp);
        self.critics.soft_update(self.cfg.tau);
        self.updates += 1;
        if !self.policy.net.is_finite() || !self.critics.q1.is_finite() || !self.critics.q2.is_finite() {
            return Err(SacError::NonFinite { what: "parameters", step });
        }
        Ok(LossReport {
            critic_loss,
            actor_loss,
            entropy,
        })
    }

    pub fn sac_update<R: Rng>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<LossReport, SacError> {
        let batch = buffer.sample(self.cfg.batch_size, rng)?;
        let noise = UpdateNoise::sample(batch.len(), self.act_dim(), rng);
        self.update_with(&batch, &noise)
    }

    /// Versioned text checkpoint with layer shapes, row-major parameters, a
    /// config echo and the seed.
    pub fn to_checkpoint(&self, echo: &[(String, String)]) -> String {
        let mut s = format!("cubegrasp-checkpoint {CHECKPOINT_VERSION}\n");
        let _ = writeln!(s, "seed {}", self.cfg.seed);
        let _ = writeln!(s, "updates {}", self.updates);
        for (k, v) in echo {
            let _ = writeln!(s, "config {k} = {v}");
        }
        let nets = [
            ("policy", &self.policy.net),
            ("q1", &self.critics.q1),
            ("q2", &self.critics.q2),
            ("target1", &self.critics.target1),
            ("target2", &self.critics.target2),
        ];
        for (name, net) in nets {
            let sizes: Vec<String> = net.sizes.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "net {name} {} {}", net.activation.label(), sizes.join(" "));
            let vals: Vec<String> = net.params.iter().map(|p| format!("{p:?}")).collect();
            let _ = writeln!(s, "{}", vals.join(" "));
        }
        s.push_str("end\n");
        s
    }

    /// Parses a checkpoint; `cfg` supplies the hyperparameters (the networks
    /// must match its layer shapes). Returns the config echo alongside.
    pub fn from_checkpoint(text: &str, cfg: SacConfig) -> Result<(Agent, Vec<(String, String)>), SacError> {
        let bad = |m: String| SacError::Checkpoint(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let version = header
            .strip_prefix("cubegrasp-checkpoint ")
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| SacError::Version {
                found: 0,
                supported: CHECKPOINT_VERSION,
            })?;
        if version > CHECKPOINT_VERSION || version == 0 {
            return Err(SacError::Version {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let mut echo = Vec::new();
        let mut nets: Vec<(String, Mlp)> = Vec::new();
        let mut updates = 0;
        let mut seed = None;
        let mut ended = false;
        while let Some(line) = lines.next() {
            if line == "end" {
                ended = true;
                break;
            }
            if let Some(v) = line.strip_prefix("seed ") {
                seed = Some(v.trim().parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?);
            } else if let Some(v) = line.strip_prefix("updates ") {
                updates = v.trim().parse::<u64>().map_err(|e| bad(format!("updates: {e}")))?;
            } else if let Some(kv) = line.strip_prefix("config ") {
                let (k, v) = kv.split_once(" = ").ok_or_else(|| bad(format!("config line '{line}'")))?;
                echo.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("net ") {
                let mut parts = rest.split_whitespace();
                let name = parts.next().ok_or_else(|| bad("net name".into()))?.to_string();
                let act = parts
                    .next()
                    .and_then(Activation::from_label)
                    .ok_or_else(|| bad(format!("activation of {name}")))?;
                let sizes: Result<Vec<usize>, _> = parts.map(str::parse::<usize>).collect();
                let sizes = sizes.map_err(|e| bad(format!("sizes of {name}: {e}")))?;
                if sizes.len() < 2 || sizes.contains(&0) {
                    return Err(bad(format!("sizes of {name}")));
                }
                let mut net = Mlp::zeros(&sizes, act);
                let vals: Result<Vec<f64>, _> = lines
                    .next()
                    .ok_or_else(|| bad(format!("parameters of {name}")))?
                    .split_whitespace()
                    .map(str::parse::<f64>)
                    .collect();
                let vals = vals.map_err(|e| bad(format!("parameters of {name}: {e}")))?;
                if vals.len() != net.params.len() || vals.iter().any(|v| !v.is_finite()) {
                    return Err(bad(format!("{name}: expected {} finite parameters", net.params.len())));
                }
                net.params = vals;
                nets.push((name, net));
            } else if !line.trim().is_empty() {
                return Err(bad(format!("unexpected line '{line}'")));
            }
        }
        if !ended {
            return Err(bad("missing end marker".into()));
        }
        let mut take = |name: &str| -> Result<Mlp, SacError> {
            let i = nets
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| bad(format!("missing net {name}")))?;
            Ok(nets.remove(i).1)
        };
        let policy = GaussianPolicy::new(take("policy")?)?;
        let critics = TwinCritic {
            q1: take("q1")?,
            q2: take("q2")?,
            target1: take("target1")?,
            target2: take("target2")?,
        };
        let want_hidden = &cfg.hidden;
        let check = |name: &str, net: &Mlp| -> Result<(), SacError> {
            let hidden = &net.sizes[1..net.sizes.len() - 1];
            if hidden != want_hidden.as_slice() || net.activation != cfg.activation {
                return Err(SacError::Shape(format!(
                    "{name} has hidden layers {hidden:?} ({}), config wants {want_hidden:?} ({})",
                    net.activation.label(),
                    cfg.activation.label()
                )));
            }
            Ok(())
        };
        check("policy", &policy.net)?;
        for (name, net) in [
            ("q1", &critics.q1),
            ("q2", &critics.q2),
            ("target1", &critics.target1),
            ("target2", &critics.target2),
        ] {
            check(name, net)?;
            if net.sizes[0] != policy.net.sizes[0] + policy.act_dim || net.output_dim() != 1 {
                return Err(SacError::Shape(format!("{name} does not match the policy dimensions")));
            }
        }
        let mut cfg = cfg;
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        let mut agent = Agent::from_parts(cfg, policy, critics);
        agent.updates = updates;
        Ok((agent, echo))
    }
}
