//! Intelligent Driver Model car-following law.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmParams {
    /// Desired speed (m/s).
    pub v0: f64,
    pub delta: f64,
    /// Minimum standstill gap (m).
    pub s0: f64,
    /// Time headway (s).
    pub t_headway: f64,
    pub a_max: f64,
    /// Comfortable deceleration.
    pub b: f64,
    /// Deceleration applied when the gap has closed.
    pub b_max: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v0: 12.0,
            delta: 4.0,
            s0: 2.0,
            t_headway: 1.5,
            a_max: 2.0,
            b: 3.0,
            b_max: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub speed: f64,
    /// Bumper-to-bumper distance (m).
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmOutput {
    pub accel: f64,
    /// Set when the gap is non-positive and the hard-brake branch was taken.
    pub emergency: bool,
}

/// Desired dynamic gap `s*`. The velocity term is floored at zero so a faster
/// leader never reads as a reason to brake.
pub fn desired_gap(v: f64, v_lead: f64, p: &IdmParams) -> f64 {
    let dynamic = v * p.t_headway + v * (v - v_lead) / (2.0 * (p.a_max * p.b).sqrt());
    p.s0 + dynamic.max(0.0)
}

pub fn idm_acceleration(v: f64, leader: Option<Leader>, p: &IdmParams) -> IdmOutput {
    let free = 1.0 - (v / p.v0).powf(p.delta);
    match leader {
        None => IdmOutput {
            accel: p.a_max * free,
            emergency: false,
        },
        Some(l) if l.gap <= 0.0 => IdmOutput {
            accel: -p.b_max,
            emergency: true,
        },
        Some(l) => {
            let ratio = desired_gap(v, l.speed, p) / l.gap;
            IdmOutput {
                accel: (p.a_max * (free - ratio * ratio)).max(-p.b_max),
                emergency: false,
            }
        }
    }
}
