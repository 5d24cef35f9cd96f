//! Reward-based TD3 baseline, sharing the TD machinery of the proxy-value
//! learner with the reward term switched on.

use std::collections::VecDeque;

use pvp_nn::{soft_update, Mlp, NetSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::losses::{critic_term, td_loss, td_targets, TargetSmoothing, TdBatch};
use crate::CoreError;

/// A reward-emitting environment with a flat continuous action.
pub trait RlEnv {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> RlStep;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Episode over for any reason.
    pub done: bool,
    /// Episode over by a real terminal state (no bootstrapping).
    pub terminal: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Td3Config {
    pub gamma: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub tau: f64,
    pub warmup: usize,
    pub exploration_noise: f64,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub policy_delay: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    /// Clipped double-Q with two critics.
    pub twin: bool,
    pub policy_init_scale: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            gamma: 0.99,
            batch_size: 1024,
            lr: 1e-4,
            tau: 0.05,
            warmup: 100,
            exploration_noise: 0.1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            policy_delay: 2,
            buffer_capacity: 100_000,
            hidden: vec![256, 256],
            twin: false,
            policy_init_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlTransition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub reward: f64,
    pub s_next: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Td3Report {
    pub loss_q: f64,
    pub loss_policy: Option<f64>,
}

pub struct Td3Learner {
    pub cfg: Td3Config,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critics: Vec<Mlp>,
    pub critic_targets: Vec<Mlp>,
    buffer: VecDeque<RlTransition>,
    rng: ChaCha8Rng,
    updates: u64,
}

impl Td3Learner {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: Td3Config, seed: u64) -> Result<Self, CoreError> {
        if cfg.batch_size == 0 || cfg.policy_delay == 0 {
            return Err(CoreError::Config("td3.batch_size and policy_delay must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Mlp::new(
            NetSpec::action_head(obs_dim, act_dim).with_hidden(cfg.hidden.clone()),
            cfg.policy_init_scale,
            &mut rng,
        )?;
        let n_critics = if cfg.twin { 2 } else { 1 };
        let critics: Vec<Mlp> = (0..n_critics)
            .map(|_| Mlp::new(NetSpec::value_head(obs_dim + act_dim).with_hidden(cfg.hidden.clone()), 1.0, &mut rng))
            .collect::<Result<_, _>>()?;
        Ok(Td3Learner {
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            buffer: VecDeque::new(),
            cfg,
            rng,
            updates: 0,
        })
    }

    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>, CoreError> {
        Ok(self.actor.forward(obs)?)
    }

    /// Policy action plus clamped Gaussian exploration noise.
    pub fn explore(&mut self, obs: &[f64]) -> Result<Vec<f64>, CoreError> {
        let mut a = self.act(obs)?;
        if self.cfg.exploration_noise > 0.0 {
            let n = Normal::new(0.0, self.cfg.exploration_noise).expect("finite noise");
            for v in &mut a {
                *v = (*v + n.sample(&mut self.rng)).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }

    pub fn store(&mut self, t: RlTransition) {
        if self.buffer.len() == self.cfg.buffer_capacity.max(1) {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn smoothing(&self) -> TargetSmoothing {
        TargetSmoothing {
            gamma: self.cfg.gamma,
            sigma: self.cfg.target_noise,
            clip: self.cfg.target_noise_clip,
        }
    }

    fn batch(&mut self) -> TdBatch {
        let n = self.cfg.batch_size;
        let picks: Vec<usize> = (0..n).map(|_| self.rng.random_range(0..self.buffer.len())).collect();
        let ts: Vec<&RlTransition> = picks.iter().map(|&i| &self.buffer[i]).collect();
        TdBatch {
            n,
            s: ts.iter().flat_map(|t| t.s.iter().copied()).collect(),
            a: ts.iter().flat_map(|t| t.a.iter().copied()).collect(),
            s_next: ts.iter().flat_map(|t| t.s_next.iter().copied()).collect(),
            not_done: ts.iter().map(|t| if t.terminal { 0.0 } else { 1.0 }).collect(),
            reward: Some(ts.iter().map(|t| t.reward).collect()),
        }
    }

    /// One critic step, plus a delayed actor step and target tracking.
    pub fn update_on(&mut self, batch: &TdBatch) -> Result<Td3Report, CoreError> {
        let targets_ref: Vec<&Mlp> = self.critic_targets.iter().collect();
        let smoothing = self.smoothing();
        let y = td_targets(&targets_ref, &self.actor_target, batch, smoothing, &mut self.rng)?;
        let mut loss_q = 0.0;
        for q in &mut self.critics {
            q.zero_grad();
            loss_q += td_loss(q, batch, &y, true)?;
            q.optimizer_step(self.cfg.lr)?;
        }
        self.updates += 1;
        let mut report = Td3Report {
            loss_q,
            loss_policy: None,
        };
        if self.updates % self.cfg.policy_delay as u64 == 0 {
            self.actor.zero_grad();
            let lp = critic_term(&mut self.actor, &self.critics[0], &batch.s, batch.n, true)?;
            self.actor.optimizer_step(self.cfg.lr)?;
            report.loss_policy = Some(lp);
            soft_update(&mut self.actor_target, &self.actor, self.cfg.tau)?;
            for (t, q) in self.critic_targets.iter_mut().zip(&self.critics) {
                soft_update(t, q, self.cfg.tau)?;
            }
        }
        Ok(report)
    }

    pub fn update(&mut self) -> Result<Option<Td3Report>, CoreError> {
        if self.buffer.len() < self.cfg.warmup.max(1) {
            return Ok(None);
        }
        let batch = self.batch();
        self.update_on(&batch).map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Td3RunStats {
    pub episodes: usize,
    pub successes: usize,
}

/// Runs TD3 for `steps` interactions, starting a new episode whenever one ends.
pub fn baseline_td3_train<E: RlEnv>(
    env: &mut E,
    learner: &mut Td3Learner,
    steps: usize,
    seed: u64,
) -> Result<Td3RunStats, CoreError> {
    let mut stats = Td3RunStats::default();
    let mut episode = 0u64;
    let mut obs = env.reset(seed.wrapping_add(episode));
    for _ in 0..steps {
        let a = learner.explore(&obs)?;
        let out = env.step(&a);
        learner.store(RlTransition {
            s: obs.clone(),
            a,
            reward: out.reward,
            s_next: out.obs.clone(),
            terminal: out.terminal,
        });
        learner.update()?;
        obs = out.obs;
        if out.done {
            stats.episodes += 1;
            stats.successes += out.success as usize;
            episode += 1;
            obs = env.reset(seed.wrapping_add(episode));
        }
    }
    Ok(stats)
}

/// One-dimensional task: move a point from `x ∈ [−1, 0]` to `x = 1` with
/// velocity commands, dense reward on progress.
#[derive(Debug, Clone)]
pub struct LineToyEnv {
    x: f64,
    steps: usize,
    pub horizon: usize,
}

impl Default for LineToyEnv {
    fn default() -> Self {
        LineToyEnv {
            x: 0.0,
            steps: 0,
            horizon: 50,
        }
    }
}

impl RlEnv for LineToyEnv {
    fn obs_dim(&self) -> usize {
        1
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.x = rng.random_range(-1.0..0.0);
        self.steps = 0;
        vec![self.x]
    }

    fn step(&mut self, action: &[f64]) -> RlStep {
        let prev = self.x;
        self.x = (self.x + 0.1 * action[0].clamp(-1.0, 1.0)).clamp(-2.0, 2.0);
        self.steps += 1;
        let success = self.x >= 1.0;
        let timeout = self.steps >= self.horizon;
        let reward = 10.0 * (self.x - prev) + if success { 1.0 } else { 0.0 };
        RlStep {
            obs: vec![self.x],
            reward,
            done: success || timeout,
            terminal: success,
            success,
        }
    }
}

/// The driving environment behind the [`RlEnv`] interface, drawing a
/// training scene per episode.
pub struct DriveRlEnv {
    catalog: std::sync::Arc<pvp_sim::SceneCatalog>,
    cfg: pvp_sim::EnvConfig,
    env: Option<pvp_sim::DriveEnv>,
    run_seed: u64,
}

impl DriveRlEnv {
    pub fn new(
        catalog: std::sync::Arc<pvp_sim::SceneCatalog>,
        cfg: pvp_sim::EnvConfig,
        run_seed: u64,
    ) -> Result<Self, CoreError> {
        cfg.validate()?;
        if catalog.is_empty(pvp_sim::Split::Train) {
            return Err(CoreError::Config("the training split has no scenes".into()));
        }
        Ok(DriveRlEnv {
            catalog,
            cfg,
            env: None,
            run_seed,
        })
    }
}

impl RlEnv for DriveRlEnv {
    fn obs_dim(&self) -> usize {
        self.cfg.observation_width()
    }

    fn act_dim(&self) -> usize {
        crate::losses::ACT_DIM
    }

    /// `seed` is the episode counter of the run.
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let split = pvp_sim::Split::Train;
        let (scene, env_seed) = crate::runner::episode_plan(self.run_seed, seed, self.catalog.len(split));
        let (_, map) = self.catalog.by_index(split, scene);
        let mut env = pvp_sim::DriveEnv::new(map, self.cfg.clone()).expect("config validated at construction");
        let obs = env.reset(env_seed).to_vec();
        self.env = Some(env);
        obs
    }

    fn step(&mut self, action: &[f64]) -> RlStep {
        let env = self.env.as_mut().expect("reset before step");
        let out = env.step([action[0], action[1]]).expect("episode is running");
        RlStep {
            obs: out.observation.to_vec(),
            reward: out.reward,
            done: out.done,
            terminal: matches!(out.termination, pvp_sim::Termination::Success | pvp_sim::Termination::OutOfRoad),
            success: out.termination == pvp_sim::Termination::Success,
        }
    }
}
