//! Training and evaluation loops tying the episode wrapper to the agent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{RunConfig, TrainConfig};
use crate::env::{Env, EnvError, GoalTrajectory, Observation, ACTION_DIM, OBS_DIM};
use crate::sac::{sample_action, Agent, Experience, GaussianPolicy, ReplayBuffer, SacError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Sac(#[from] SacError),
    #[error("episode {episode} ended early: {reason}")]
    Failure { episode: usize, reason: String },
}

/// Network input: positions in decimeters, quaternion unchanged.
pub fn featurize(obs: &Observation) -> Vec<f64> {
    let mut v = obs.to_array().to_vec();
    for (i, x) in v.iter_mut().enumerate() {
        if !(3..7).contains(&i) {
            *x *= 10.0;
        }
    }
    v
}

/// Decorrelated per-episode seed.
pub fn episode_seed(run_seed: u64, episode: u64) -> u64 {
    let mut z = run_seed ^ episode.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn env_from_config(cfg: &RunConfig) -> Result<Env, EnvError> {
    Env::new(
        cfg.env.clone(),
        cfg.sim.clone(),
        cfg.cube,
        cfg.robot.clone(),
        cfg.control.clone(),
        cfg.randomization,
    )
}

/// High-level decision rule for one window.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Face centers every window.
    FaceCenters,
    /// `tanh(mean)` of a trained policy.
    Deterministic(&'a GaussianPolicy),
}

impl Policy<'_> {
    pub fn act(&self, obs: &Observation) -> [f64; ACTION_DIM] {
        match self {
            Policy::FaceCenters => [0.0; ACTION_DIM],
            Policy::Deterministic(p) => {
                // deterministic actions draw no randomness
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let a = sample_action(p, &featurize(obs), true, &mut rng);
                std::array::from_fn(|i| a[i])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub ret: f64,
    pub windows: usize,
    pub failure: Option<String>,
}

/// Runs one episode to completion; `goals` overrides the sampled trajectory.
pub fn run_episode(
    env: &mut Env,
    policy: Policy<'_>,
    seed: u64,
    goals: Option<&GoalTrajectory>,
) -> Result<EpisodeReport, EnvError> {
    let mut obs = match goals {
        Some(g) => env.reset_with_goals(seed, g.clone())?,
        None => env.reset(seed),
    };
    let mut report = EpisodeReport {
        ret: 0.0,
        windows: 0,
        failure: None,
    };
    loop {
        let out = env.step(&policy.act(&obs))?;
        report.ret += out.reward;
        report.windows += 1;
        obs = out.observation;
        if out.failure.is_some() {
            report.failure = out.failure;
        }
        if out.done {
            return Ok(report);
        }
    }
}

/// Returns over a fixed evaluation set; episode `i` uses cube seed
/// `seed_offset + i`.
pub fn evaluate(
    env: &mut Env,
    policy: Policy<'_>,
    goals: &[GoalTrajectory],
    seed_offset: u64,
) -> Result<Vec<f64>, EnvError> {
    goals
        .iter()
        .enumerate()
        .map(|(i, g)| run_episode(env, policy, seed_offset + i as u64, Some(g)).map(|r| r.ret))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub ret: f64,
    /// Means over the updates made during the episode; `None` before learning starts.
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub entropy: Option<f64>,
}

pub struct Trainer {
    pub env: Env,
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    pub cfg: TrainConfig,
    rng: ChaCha8Rng,
    episode: usize,
}

impl Trainer {
    pub fn new(run: &RunConfig) -> Result<Trainer, TrainError> {
        let env = env_from_config(run)?;
        let mut rng = ChaCha8Rng::seed_from_u64(run.sac.seed);
        let agent = Agent::new(OBS_DIM, ACTION_DIM, run.sac.clone(), &mut rng)?;
        Ok(Trainer {
            env,
            buffer: ReplayBuffer::new(run.sac.buffer_capacity),
            agent,
            cfg: run.train.clone(),
            rng,
            episode: 0,
        })
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    /// Collects one episode, updating after every transition once the buffer
    /// holds a full batch.
    pub fn run_episode(&mut self) -> Result<MetricsRow, TrainError> {
        let seed = episode_seed(self.agent.cfg.seed, self.episode as u64);
        let mut obs = self.env.reset(seed);
        let warmup = self.episode < self.cfg.warmup_episodes;
        let mut ret = 0.0;
        let (mut actor, mut critic, mut entropy, mut n) = (0.0, 0.0, 0.0, 0usize);
        loop {
            let s = featurize(&obs);
            let a: Vec<f64> = if warmup {
                (0..ACTION_DIM).map(|_| self.rng.gen_range(-1.0..=1.0)).collect()
            } else {
                sample_action(&self.agent.policy, &s, false, &mut self.rng)
            };
            let action: [f64; ACTION_DIM] = std::array::from_fn(|i| a[i]);
            let out = self.env.step(&action)?;
            ret += out.reward;
            self.buffer.push(Experience {
                s,
                a,
                r: out.reward,
                s2: featurize(&out.observation),
                done: out.done,
            });
            if self.buffer.len() >= self.agent.cfg.batch_size {
                for _ in 0..self.cfg.updates_per_step {
                    let rep = self.agent.sac_update(&self.buffer, &mut self.rng)?;
                    actor += rep.actor_loss;
                    critic += rep.critic_loss;
                    entropy += rep.entropy;
                    n += 1;
                }
            }
            obs = out.observation;
            if out.done {
                break;
            }
        }
        let mean = |x: f64| (n > 0).then(|| x / n as f64);
        let row = MetricsRow {
            episode: self.episode,
            ret,
            actor_loss: mean(actor),
            critic_loss: mean(critic),
            entropy: mean(entropy),
        };
        self.episode += 1;
        Ok(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_scale_positions_only() {
        let obs = Observation::from_slice(&[0.1; OBS_DIM]).unwrap();
        let f = featurize(&obs);
        assert!((f[0] - 1.0).abs() < 1e-15 && f[3] == 0.1 && (f[18] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn episode_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|k| episode_seed(7, k)).collect();
        assert_eq!(s.len(), 1000);
    }
}
