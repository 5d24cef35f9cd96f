//! The intervention gate: decides each tick whether the human action
//! replaces the novice action.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Intervene when the novice action is unlikely under the expert's
    /// Gaussian action model.
    Threshold,
    /// A live operator decides.
    Human,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub mode: GateMode,
    pub epsilon: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            mode: GateMode::Threshold,
            epsilon: 0.05,
        }
    }
}

/// Density of the axis-aligned Gaussian `N(mu, diag(sigma²))` at `a`.
pub fn gaussian_density(a: Action, mu: Action, sigma: [f64; 2]) -> f64 {
    let z2 = ((a[0] - mu[0]) / sigma[0]).powi(2) + ((a[1] - mu[1]) / sigma[1]).powi(2);
    (-0.5 * z2).exp() / (2.0 * std::f64::consts::PI * sigma[0] * sigma[1])
}

/// Radius at which an isotropic 2D density with per-axis deviation `sigma`
/// equals `eps`, if it ever does.
pub fn boundary_radius(eps: f64, sigma: f64) -> Option<f64> {
    let peak = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    (eps > 0.0 && eps < peak).then(|| (2.0 * sigma * sigma * (peak / eps).ln()).sqrt())
}

pub fn clamp_action(a: Action) -> Action {
    [a[0].clamp(-1.0, 1.0), a[1].clamp(-1.0, 1.0)]
}

/// Threshold rule: intervene iff the novice action's density under the
/// expert model falls below `eps`.
pub fn threshold_fires(a_n: Action, mu: Action, sigma: [f64; 2], eps: f64) -> bool {
    gaussian_density(a_n, mu, sigma) < eps
}

/// Draws a human action from the expert model, clamped to the action box.
pub fn sample_expert<R: Rng + ?Sized>(mu: Action, sigma: [f64; 2], rng: &mut R) -> Action {
    let mut a = mu;
    for (v, s) in a.iter_mut().zip(sigma) {
        *v += s * rng.sample::<f64, _>(StandardNormal);
    }
    clamp_action(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("intervention flag set without a human action")]
pub struct MissingHumanAction;

/// The executed action: the human's when intervening, otherwise the novice's.
pub fn behavior_action(intervene: bool, a_n: Action, a_h: Option<Action>) -> Result<Action, MissingHumanAction> {
    if intervene {
        a_h.ok_or(MissingHumanAction)
    } else {
        Ok(a_n)
    }
}

/// Message sent by the operator's client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanOverride {
    pub takeover: bool,
    pub steer: f64,
    pub accel: f64,
    pub client_time_ms: i64,
}

/// Producer half of the operator channel, held by the network bridge.
#[derive(Debug, Clone)]
pub struct HumanHandle {
    tx: Sender<HumanOverride>,
    connected: Arc<AtomicBool>,
}

impl HumanHandle {
    pub fn send(&self, msg: HumanOverride) -> bool {
        self.tx.send(msg).is_ok()
    }

    pub fn set_connected(&self, up: bool) {
        self.connected.store(up, Ordering::SeqCst);
    }
}

/// Consumer half, read once per control tick without blocking.
#[derive(Debug)]
pub struct HumanChannel {
    rx: Receiver<HumanOverride>,
    connected: Arc<AtomicBool>,
    latest: Option<HumanOverride>,
}

pub fn human_channel() -> (HumanHandle, HumanChannel) {
    let (tx, rx) = mpsc::channel();
    let connected = Arc::new(AtomicBool::new(false));
    (
        HumanHandle {
            tx,
            connected: connected.clone(),
        },
        HumanChannel {
            rx,
            connected,
            latest: None,
        },
    )
}

/// What the operator channel says this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HumanInput {
    /// No live operator: the caller must fail safe.
    Dead,
    Idle,
    Takeover(Action, i64),
}

impl HumanChannel {
    /// Drains pending messages and keeps the newest. Without a new message
    /// the previous state holds.
    pub fn poll(&mut self) -> HumanInput {
        loop {
            match self.rx.try_recv() {
                Ok(m) => self.latest = Some(m),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return HumanInput::Dead,
            }
        }
        if !self.connected.load(Ordering::SeqCst) {
            self.latest = None;
            return HumanInput::Dead;
        }
        match self.latest {
            Some(m) if m.takeover => HumanInput::Takeover(clamp_action([m.steer, m.accel]), m.client_time_ms),
            _ => HumanInput::Idle,
        }
    }
}

pub const FAILSAFE_ACTION: Action = [0.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateDecision {
    pub intervene: bool,
    pub a_h: Option<Action>,
    /// Set when the operator channel was dead and the car was braked.
    pub failsafe: bool,
    pub client_time_ms: Option<i64>,
}

impl GateDecision {
    fn pass() -> Self {
        GateDecision {
            intervene: false,
            a_h: None,
            failsafe: false,
            client_time_ms: None,
        }
    }
}

pub struct InterventionGate {
    pub cfg: GateConfig,
    pub sigma: [f64; 2],
    human: Option<HumanChannel>,
}

impl InterventionGate {
    pub fn new(cfg: GateConfig, sigma: [f64; 2]) -> Self {
        InterventionGate { cfg, sigma, human: None }
    }

    pub fn with_human(mut self, channel: HumanChannel) -> Self {
        self.human = Some(channel);
        self
    }

    pub fn mode(&self) -> GateMode {
        self.cfg.mode
    }

    /// `mu` is the expert's mean action; it is only needed in threshold mode.
    pub fn should_intervene<R: Rng + ?Sized>(&mut self, a_n: Action, mu: Option<Action>, rng: &mut R) -> GateDecision {
        match self.cfg.mode {
            GateMode::Off => GateDecision::pass(),
            GateMode::Threshold => {
                let Some(mu) = mu else {
                    return GateDecision::pass();
                };
                if threshold_fires(a_n, mu, self.sigma, self.cfg.epsilon) {
                    GateDecision {
                        intervene: true,
                        a_h: Some(sample_expert(mu, self.sigma, rng)),
                        failsafe: false,
                        client_time_ms: None,
                    }
                } else {
                    GateDecision::pass()
                }
            }
            GateMode::Human => {
                let input = self.human.as_mut().map_or(HumanInput::Dead, HumanChannel::poll);
                match input {
                    HumanInput::Dead => GateDecision {
                        intervene: true,
                        a_h: Some(FAILSAFE_ACTION),
                        failsafe: true,
                        client_time_ms: None,
                    },
                    HumanInput::Idle => GateDecision::pass(),
                    HumanInput::Takeover(a, t) => GateDecision {
                        intervene: true,
                        a_h: Some(a),
                        failsafe: false,
                        client_time_ms: Some(t),
                    },
                }
            }
        }
    }
}
