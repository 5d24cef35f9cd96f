//! Loss terms of the proxy-value learner and the shared TD machinery.
//!
//! Every function evaluates its loss on a batch and, when `accumulate` is
//! set, adds the loss gradient into the network's gradient accumulator.
//! Networks are never stepped here.

use pvp_nn::{Mlp, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::buffer::Transition;
use crate::Action;

pub const ACT_DIM: usize = 2;

/// Row-wise `[state | action]` matrix.
pub fn state_action_rows(states: &[f64], actions: &[f64], n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let obs = states.len() / n;
    let act = actions.len() / n;
    let mut out = Vec::with_capacity(n * (obs + act));
    for i in 0..n {
        out.extend_from_slice(&states[i * obs..(i + 1) * obs]);
        out.extend_from_slice(&actions[i * act..(i + 1) * act]);
    }
    out
}

fn stack_states(ts: &[&Transition]) -> Vec<f64> {
    ts.iter().flat_map(|t| t.s.iter().copied()).collect()
}

fn stack_actions(ts: &[&Transition], pick: impl Fn(&Transition) -> Action) -> Vec<f64> {
    ts.iter().flat_map(|t| pick(t)).collect()
}

fn require_intervened(batch_h: &[&Transition]) -> std::result::Result<Vec<Action>, crate::CoreError> {
    batch_h
        .iter()
        .map(|t| match (t.intervened, t.a_h) {
            (true, Some(a)) => Ok(a),
            _ => Err(crate::CoreError::Contract("human batch holds an autonomous transition".into())),
        })
        .collect()
}

/// `mean[(Q(s,a_h) − B)² + (Q(s,a_n) + B)²]` over intervened transitions.
pub fn proxy_value_loss(
    q: &mut Mlp,
    batch_h: &[&Transition],
    bound: f64,
    accumulate: bool,
) -> std::result::Result<f64, crate::CoreError> {
    let n = batch_h.len();
    if n == 0 {
        return Ok(0.0);
    }
    let a_h = require_intervened(batch_h)?;
    let states = stack_states(batch_h);
    let human: Vec<f64> = a_h.iter().flatten().copied().collect();
    let novice = stack_actions(batch_h, |t| t.a_n);
    let mut rows = state_action_rows(&states, &human, n);
    rows.extend(state_action_rows(&states, &novice, n));
    let tape = q.forward_batch(&rows, 2 * n)?;
    let out = tape.output();
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut up = vec![0.0; 2 * n];
    for i in 0..n {
        let eh = out[i] - bound;
        let en = out[n + i] + bound;
        loss += eh * eh + en * en;
        up[i] = 2.0 * eh * inv;
        up[n + i] = 2.0 * en * inv;
    }
    if accumulate {
        q.backward(&tape, &up)?;
    }
    Ok(loss * inv)
}

/// Batch for TD targets, generic in action width.
#[derive(Debug, Clone)]
pub struct TdBatch {
    pub n: usize,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub s_next: Vec<f64>,
    pub not_done: Vec<f64>,
    /// Present only on the reward-based path.
    pub reward: Option<Vec<f64>>,
}

impl TdBatch {
    /// Executed actions of the given transitions, with no reward channel.
    pub fn reward_free(ts: &[&Transition]) -> Self {
        TdBatch {
            n: ts.len(),
            s: stack_states(ts),
            a: stack_actions(ts, Transition::executed),
            s_next: ts.iter().flat_map(|t| t.s_next.iter().copied()).collect(),
            not_done: ts.iter().map(|t| if t.done { 0.0 } else { 1.0 }).collect(),
            reward: None,
        }
    }

    pub fn with_rewards(mut self, rewards: Vec<f64>) -> Self {
        self.reward = Some(rewards);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSmoothing {
    pub gamma: f64,
    pub sigma: f64,
    pub clip: f64,
}

/// `r + γ·(1 − done)·min_k Q̂_k(s′, clamp(π̂(s′) + clip(ε)))`, with the reward
/// term present only when the batch carries rewards.
pub fn td_targets<R: Rng + ?Sized>(
    q_targets: &[&Mlp],
    policy_target: &Mlp,
    batch: &TdBatch,
    smoothing: TargetSmoothing,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = batch.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    let tape = policy_target.forward_batch(&batch.s_next, n)?;
    let mut next_a = tape.output().to_vec();
    if smoothing.sigma > 0.0 {
        let normal = Normal::new(0.0, smoothing.sigma).expect("finite smoothing sigma");
        for a in &mut next_a {
            let eps: f64 = normal.sample(rng);
            *a = (*a + eps.clamp(-smoothing.clip, smoothing.clip)).clamp(-1.0, 1.0);
        }
    }
    let rows = state_action_rows(&batch.s_next, &next_a, n);
    let mut best: Option<Vec<f64>> = None;
    for q in q_targets {
        let out = q.forward_batch(&rows, n)?.output().to_vec();
        best = Some(match best {
            None => out,
            Some(b) => b.iter().zip(&out).map(|(x, y)| x.min(*y)).collect(),
        });
    }
    let next_q = best.expect("at least one target critic");
    Ok((0..n)
        .map(|i| {
            let r = batch.reward.as_ref().map_or(0.0, |r| r[i]);
            r + smoothing.gamma * batch.not_done[i] * next_q[i]
        })
        .collect())
}

/// `mean (Q(s,a) − y)²` against precomputed constant targets.
pub fn td_loss(q: &mut Mlp, batch: &TdBatch, targets: &[f64], accumulate: bool) -> Result<f64> {
    let n = batch.n;
    if n == 0 {
        return Ok(0.0);
    }
    let rows = state_action_rows(&batch.s, &batch.a, n);
    let tape = q.forward_batch(&rows, n)?;
    let out = tape.output();
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut up = vec![0.0; n];
    for i in 0..n {
        let e = out[i] - targets[i];
        loss += e * e;
        up[i] = 2.0 * e * inv;
    }
    if accumulate {
        q.backward(&tape, &up)?;
    }
    Ok(loss * inv)
}

/// `½·mean ‖π(s) − a_h‖²`, scaled by `weight` in the accumulated gradient.
pub fn bc_loss_raw(policy: &mut Mlp, states: &[f64], targets: &[f64], n: usize, weight: f64, accumulate: bool) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let tape = policy.forward_batch(states, n)?;
    let out = tape.output();
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let up: Vec<f64> = out
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let e = p - t;
            loss += 0.5 * e * e;
            weight * e * inv
        })
        .collect();
    if accumulate && weight != 0.0 {
        policy.backward(&tape, &up)?;
    }
    Ok(loss * inv)
}

pub fn bc_loss(
    policy: &mut Mlp,
    batch_h: &[&Transition],
    weight: f64,
    accumulate: bool,
) -> std::result::Result<f64, crate::CoreError> {
    let a_h = require_intervened(batch_h)?;
    let states = stack_states(batch_h);
    let targets: Vec<f64> = a_h.iter().flatten().copied().collect();
    Ok(bc_loss_raw(policy, &states, &targets, batch_h.len(), weight, accumulate)?)
}

/// `−mean Q(s, π(s))` over `states`; the critic is read but never touched.
pub fn critic_term(policy: &mut Mlp, q: &Mlp, states: &[f64], n: usize, accumulate: bool) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let ptape = policy.forward_batch(states, n)?;
    let actions = ptape.output().to_vec();
    let act = actions.len() / n;
    let rows = state_action_rows(states, &actions, n);
    let qtape = q.forward_batch(&rows, n)?;
    let value = qtape.output().iter().sum::<f64>() / n as f64;
    if accumulate {
        let up = vec![-1.0 / n as f64; n];
        let g = q.input_gradient(&qtape, &up)?;
        let width = q.input_width();
        let obs = width - act;
        let da: Vec<f64> = (0..n).flat_map(|i| g[i * width + obs..(i + 1) * width].to_vec()).collect();
        policy.backward(&ptape, &da)?;
    }
    Ok(-value)
}

/// Policy objective: critic term over `critic_batch` plus `λ·BC` over the
/// intervened batch. Returns `(critic term, BC loss)`.
pub fn policy_objective(
    policy: &mut Mlp,
    q: &Mlp,
    critic_batch: &[&Transition],
    batch_h: &[&Transition],
    bc_weight: f64,
    accumulate: bool,
) -> std::result::Result<(f64, f64), crate::CoreError> {
    let states = stack_states(critic_batch);
    let c = critic_term(policy, q, &states, critic_batch.len(), accumulate)?;
    let b = bc_loss(policy, batch_h, bc_weight, accumulate)?;
    Ok((c, b))
}
