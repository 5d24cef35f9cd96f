//! The proxy-value learner: actor, critic, their target copies, the dual
//! buffers, and one update step.

use pvp_nn::{soft_update, Checkpoint, Mlp, NetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{DualBuffer, Transition};
use crate::losses::{policy_objective, proxy_value_loss, td_loss, td_targets, TargetSmoothing, TdBatch, ACT_DIM};
use crate::{Action, CoreError};

/// Which transitions the critic term of the policy objective averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticBatch {
    Union,
    NoviceOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    /// Proxy value bound `B`.
    pub bound: f64,
    pub gamma: f64,
    /// Draws from each buffer per update.
    pub batch_size: usize,
    pub lr: f64,
    pub tau: f64,
    pub bc_weight: f64,
    /// Minimum size of each buffer before updates start.
    pub warmup: usize,
    pub updates_per_step: usize,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    /// Gaussian noise added to the novice action in autonomous mode.
    pub exploration_noise: f64,
    /// Policy and target updates happen every this many value updates.
    pub policy_delay: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub critic_batch: CriticBatch,
    /// Scale of the policy's final layer at initialization.
    pub policy_init_scale: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            bound: 1.0,
            gamma: 0.99,
            batch_size: 1024,
            lr: 1e-4,
            tau: 0.05,
            bc_weight: 1.0,
            warmup: 100,
            updates_per_step: 1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            exploration_noise: 0.1,
            policy_delay: 2,
            buffer_capacity: 100_000,
            hidden: vec![256, 256],
            critic_batch: CriticBatch::Union,
            policy_init_scale: 0.01,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |m: &str| Err(CoreError::Config(m.to_string()));
        if !(self.bound > 0.0) {
            return bad("learner.bound must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("learner.gamma must lie in (0, 1)");
        }
        if self.batch_size == 0 || self.policy_delay == 0 || self.buffer_capacity == 0 {
            return bad("learner.batch_size, policy_delay and buffer_capacity must be at least 1");
        }
        if !(self.lr > 0.0) || !(0.0..=1.0).contains(&self.tau) {
            return bad("learner.lr must be positive and tau in [0, 1]");
        }
        if self.hidden.contains(&0) {
            return bad("learner.hidden widths must be at least 1");
        }
        Ok(())
    }

    pub fn smoothing(&self) -> TargetSmoothing {
        TargetSmoothing {
            gamma: self.gamma,
            sigma: self.target_noise,
            clip: self.target_noise_clip,
        }
    }
}

/// Actor, critic and their slowly tracking targets.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub policy: Mlp,
    pub policy_target: Mlp,
    pub q: Mlp,
    pub q_target: Mlp,
}

impl ActorCritic {
    pub fn new(obs_dim: usize, hidden: &[usize], init_scale: f64, rng: &mut ChaCha8Rng) -> Result<Self, CoreError> {
        let pspec = NetSpec::action_head(obs_dim, ACT_DIM).with_hidden(hidden.to_vec());
        let qspec = NetSpec::value_head(obs_dim + ACT_DIM).with_hidden(hidden.to_vec());
        let policy = Mlp::new(pspec, init_scale, rng)?;
        let q = Mlp::new(qspec, 1.0, rng)?;
        Ok(ActorCritic {
            policy_target: policy.clone(),
            q_target: q.clone(),
            policy,
            q,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::default();
        c.insert("policy", &self.policy);
        c.insert("policy_target", &self.policy_target);
        c.insert("q", &self.q);
        c.insert("q_target", &self.q_target);
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self, CoreError> {
        Ok(ActorCritic {
            policy: c.get("policy")?,
            policy_target: c.get("policy_target")?,
            q: c.get("q")?,
            q_target: c.get("q_target")?,
        })
    }
}

/// Deterministic action of a policy network.
pub fn policy_action(policy: &Mlp, obs: &[f64]) -> Result<Action, CoreError> {
    let out = policy.forward(obs)?;
    Ok([out[0], out[1]])
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateReport {
    pub loss_proxy: f64,
    pub loss_td: f64,
    pub loss_q_total: f64,
    pub loss_policy: Option<f64>,
    pub loss_bc: Option<f64>,
}

/// Counters and generator state needed to resume a learner exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub buffers: DualBuffer,
    pub updates: u64,
    pub rng: ChaCha8Rng,
}

pub struct PvpLearner {
    pub cfg: LearnerConfig,
    pub nets: ActorCritic,
    pub buffers: DualBuffer,
    rng: ChaCha8Rng,
    updates: u64,
}

impl PvpLearner {
    pub fn new(obs_dim: usize, cfg: LearnerConfig, seed: u64) -> Result<Self, CoreError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = ActorCritic::new(obs_dim, &cfg.hidden, cfg.policy_init_scale, &mut rng)?;
        Ok(PvpLearner {
            buffers: DualBuffer::new(cfg.buffer_capacity),
            cfg,
            nets,
            rng,
            updates: 0,
        })
    }

    pub fn act(&self, obs: &[f64]) -> Result<Action, CoreError> {
        policy_action(&self.nets.policy, obs)
    }

    pub fn store(&mut self, t: Transition) -> Result<(), CoreError> {
        Ok(self.buffers.store(t)?)
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn state(&self) -> LearnerState {
        LearnerState {
            buffers: self.buffers.clone(),
            updates: self.updates,
            rng: self.rng.clone(),
        }
    }

    pub fn restore(cfg: LearnerConfig, nets: ActorCritic, state: LearnerState) -> Result<Self, CoreError> {
        cfg.validate()?;
        Ok(PvpLearner {
            cfg,
            nets,
            buffers: state.buffers,
            rng: state.rng,
            updates: state.updates,
        })
    }

    /// One optimizer step on proxy + TD loss. Returns `(proxy, td)`.
    pub fn value_update(&mut self, batch_h: &[&Transition], batch_n: &[&Transition]) -> Result<(f64, f64), CoreError> {
        let union: Vec<&Transition> = batch_h.iter().chain(batch_n).copied().collect();
        let td = TdBatch::reward_free(&union);
        let targets = td_targets(
            &[&self.nets.q_target],
            &self.nets.policy_target,
            &td,
            self.cfg.smoothing(),
            &mut self.rng,
        )?;
        let q = &mut self.nets.q;
        q.zero_grad();
        let proxy = proxy_value_loss(q, batch_h, self.cfg.bound, true)?;
        let tdl = td_loss(q, &td, &targets, true)?;
        q.optimizer_step(self.cfg.lr)?;
        Ok((proxy, tdl))
    }

    /// One optimizer step on the policy objective. Returns `(critic, bc)`.
    pub fn policy_update(&mut self, batch_h: &[&Transition], batch_n: &[&Transition]) -> Result<(f64, f64), CoreError> {
        let critic: Vec<&Transition> = match self.cfg.critic_batch {
            CriticBatch::Union => batch_h.iter().chain(batch_n).copied().collect(),
            CriticBatch::NoviceOnly => batch_n.to_vec(),
        };
        let policy = &mut self.nets.policy;
        policy.zero_grad();
        let (c, b) = policy_objective(policy, &self.nets.q, &critic, batch_h, self.cfg.bc_weight, true)?;
        policy.optimizer_step(self.cfg.lr)?;
        Ok((c, b))
    }

    pub fn soft_update_targets(&mut self) -> Result<(), CoreError> {
        soft_update(&mut self.nets.q_target, &self.nets.q, self.cfg.tau)?;
        soft_update(&mut self.nets.policy_target, &self.nets.policy, self.cfg.tau)?;
        Ok(())
    }

    /// Samples both buffers and runs one value update, plus a policy update
    /// and target tracking on every `policy_delay`-th call. `None` until both
    /// buffers reach warmup.
    pub fn update(&mut self) -> Result<Option<UpdateReport>, CoreError> {
        if !self.buffers.ready(self.cfg.warmup) {
            return Ok(None);
        }
        let buffers = std::mem::replace(&mut self.buffers, DualBuffer::new(1));
        let res = (|| {
            let (h, n) = buffers
                .sample_balanced(self.cfg.batch_size, self.cfg.warmup, &mut self.rng)
                .expect("buffers are ready");
            let (proxy, td) = self.value_update(&h, &n)?;
            self.updates += 1;
            let mut report = UpdateReport {
                loss_proxy: proxy,
                loss_td: td,
                loss_q_total: proxy + td,
                loss_policy: None,
                loss_bc: None,
            };
            if self.updates % self.cfg.policy_delay as u64 == 0 {
                let (c, b) = self.policy_update(&h, &n)?;
                report.loss_policy = Some(c + self.cfg.bc_weight * b);
                report.loss_bc = Some(b);
                self.soft_update_targets()?;
            }
            Ok(report)
        })();
        self.buffers = buffers;
        res.map(Some)
    }
}
