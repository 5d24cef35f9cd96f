//! Scripted driver standing in for the human: pure-pursuit steering along a
//! lane chain and IDM speed control, with a Gaussian action model around its
//! output.

use pvp_sim::geom::Vec2;
use pvp_sim::vehicle::{MAX_ACCEL, MAX_BRAKE, MAX_STEER, VEHICLE_LENGTH, WHEELBASE};
use pvp_sim::{idm_acceleration, DriveEnv, IdmParams, Leader};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    /// Lookahead is `base + gain·v`, clamped to `[min, max]` meters.
    pub lookahead_base: f64,
    pub lookahead_gain: f64,
    pub lookahead_min: f64,
    pub lookahead_max: f64,
    pub cruise_speed: f64,
    /// Lateral acceleration budget used to slow down for curves.
    pub lateral_accel: f64,
    pub idm: IdmParams,
    /// Standard deviation of the action model, `[steer, accel]`.
    pub noise_std: [f64; 2],
    /// Change lanes around blocked lanes.
    pub lane_change: bool,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig {
            lookahead_base: 2.0,
            lookahead_gain: 0.8,
            lookahead_min: 6.0,
            lookahead_max: 20.0,
            cruise_speed: 10.0,
            lateral_accel: 2.5,
            idm: IdmParams {
                v0: 10.0,
                a_max: MAX_ACCEL,
                ..IdmParams::default()
            },
            noise_std: [0.3, 0.3],
            lane_change: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpertAction {
    pub action: [f64; 2],
    /// The ego could not be localized and the fallback action was returned.
    pub fallback: bool,
}

pub const FALLBACK_ACTION: [f64; 2] = [0.0, -0.5];

#[derive(Debug, Clone, Default)]
pub struct ExpertPolicy {
    pub cfg: ExpertConfig,
}

/// Where the ego sits relative to one candidate chain.
#[derive(Debug, Clone, Copy)]
struct ChainView {
    chain: usize,
    s: f64,
    d: f64,
}

impl ExpertPolicy {
    pub fn new(cfg: ExpertConfig) -> Self {
        ExpertPolicy { cfg }
    }

    /// Mean action of the expert at the current environment state.
    pub fn act(&self, env: &DriveEnv) -> ExpertAction {
        let map = env.map();
        let ego = env.ego();
        if map.localize(ego.position, Some(ego.heading)).is_none() {
            return ExpertAction {
                action: FALLBACK_ACTION,
                fallback: true,
            };
        }
        let views: Vec<ChainView> = map
            .chains()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.path.near_bbox(ego.position, 8.0))
            .filter_map(|(i, c)| {
                let f = c.path.project(ego.position);
                let ok = f.d.abs() < 1.5 * c.path.width + 0.5 && f.s >= -1.0 && f.s <= c.path.length() + 1.0;
                ok.then_some(ChainView { chain: i, s: f.s, d: f.d })
            })
            .collect();
        let Some(target) = self.pick_chain(env, &views) else {
            return ExpertAction {
                action: FALLBACK_ACTION,
                fallback: true,
            };
        };
        let path = &map.chains()[target.chain].path;
        let v = ego.speed;

        let ld = (self.cfg.lookahead_base + self.cfg.lookahead_gain * v)
            .clamp(self.cfg.lookahead_min, self.cfg.lookahead_max);
        let aim = Self::lookahead_point(path, ego.position, target.s, ld);
        let local = ego.pose().to_local(aim);
        let dist2 = local.norm_sq().max(1e-6);
        let curvature = 2.0 * local.y / dist2;
        let delta = (WHEELBASE * curvature).atan();
        let steer = (-delta / MAX_STEER).clamp(-1.0, 1.0);

        let span = (3.0 * v).max(20.0);
        let kappa = path.curvature_ahead(target.s, span);
        let mut v0 = self.cfg.cruise_speed;
        if kappa > 1e-6 {
            v0 = v0.min((self.cfg.lateral_accel / kappa).sqrt());
        }
        let idm = IdmParams { v0, ..self.cfg.idm };
        let leader = self.leader(env, target.chain, target.s);
        let a = idm_acceleration(v, leader, &idm).accel;
        let accel = if a >= 0.0 { a / MAX_ACCEL } else { a / MAX_BRAKE };
        ExpertAction {
            action: [steer, accel.clamp(-1.0, 1.0)],
            fallback: false,
        }
    }

    /// Point `ld` meters from the ego along the chain centerline, measured
    /// from the ego's projection.
    fn lookahead_point(path: &pvp_sim::Lane, ego: Vec2, s: f64, ld: f64) -> Vec2 {
        let lateral = path.embed(s, 0.0).dist(ego);
        let ahead = (ld * ld - lateral * lateral).max(0.25 * ld * ld).sqrt();
        let s_aim = s + ahead;
        if s_aim <= path.length() {
            path.embed(s_aim, 0.0)
        } else {
            // past the end, continue straight along the final heading
            let end = path.embed(path.length(), 0.0);
            end + Vec2::from_angle(path.heading_at(path.length())) * (s_aim - path.length())
        }
    }

    /// The nearest chain, unless it is blocked ahead and a neighboring chain
    /// is open.
    fn pick_chain(&self, env: &DriveEnv, views: &[ChainView]) -> Option<ChainView> {
        let nearest = views.iter().copied().min_by(|a, b| a.d.abs().total_cmp(&b.d.abs()))?;
        if !self.cfg.lane_change || !self.blocked(env, nearest) {
            return Some(nearest);
        }
        views
            .iter()
            .copied()
            .filter(|v| v.chain != nearest.chain && (v.d - nearest.d).abs() > 1.0)
            .filter(|v| !self.blocked(env, *v) && self.clear_alongside(env, *v))
            .min_by(|a, b| a.d.abs().total_cmp(&b.d.abs()))
            .or(Some(nearest))
    }

    /// A static obstacle or a crawling vehicle sits in the lane shortly ahead.
    fn blocked(&self, env: &DriveEnv, view: ChainView) -> bool {
        let path = &env.map().chains()[view.chain].path;
        let half = path.width / 2.0;
        for o in env.map().obstacles() {
            let f = path.project(o.position());
            if f.d.abs() < half + o.radius + 0.3 && f.s > view.s - 3.0 && f.s < view.s + 35.0 {
                return true;
            }
        }
        for t in env.traffic_states() {
            let f = path.project(t.position);
            if f.d.abs() < half && f.s > view.s && f.s < view.s + 25.0 && t.speed < 2.0 {
                return true;
            }
        }
        false
    }

    fn clear_alongside(&self, env: &DriveEnv, view: ChainView) -> bool {
        let path = &env.map().chains()[view.chain].path;
        env.traffic_states().iter().all(|t| {
            let f = path.project(t.position);
            !(f.d.abs() < path.width / 2.0 && f.s > view.s - 12.0 && f.s < view.s + 15.0)
        })
    }

    fn leader(&self, env: &DriveEnv, chain: usize, s: f64) -> Option<Leader> {
        let path = &env.map().chains()[chain].path;
        let half = path.width / 2.0;
        let mut best: Option<Leader> = None;
        let mut consider = |ds: f64, rear: f64, speed: f64| {
            if ds <= 0.0 || ds > 50.0 {
                return;
            }
            let gap = ds - rear - VEHICLE_LENGTH / 2.0;
            if best.is_none_or(|b| gap < b.gap) {
                best = Some(Leader { speed, gap });
            }
        };
        for t in env.traffic_states() {
            let f = path.project(t.position);
            if f.d.abs() < half + 0.5 {
                consider(f.s - s, VEHICLE_LENGTH / 2.0, t.speed);
            }
        }
        for o in env.map().obstacles() {
            let f = path.project(o.position());
            if f.d.abs() < half + o.radius {
                consider(f.s - s, o.radius, 0.0);
            }
        }
        best
    }
}
