//! The driving environment: ego bicycle model, IDM traffic on route chains,
//! lidar observation, reward, cost and termination.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, OrientedBox, Pose, Vec2};
use crate::idm::{idm_acceleration, IdmParams, Leader};
use crate::lane::BoundaryKind;
use crate::lidar::{lidar_scan, LidarConfig, LidarTarget};
use crate::map::SceneMap;
use crate::vehicle::{VehicleKind, VehicleState, VEHICLE_LENGTH, VEHICLE_WIDTH};

/// Ego summary width: speed, steering, heading error, left and right
/// boundary distance.
pub const EGO_FEATURES: usize = 5;
/// Two checkpoints in the ego frame.
pub const NAV_FEATURES: usize = 4;
/// Lateral boundary rays saturate at this distance.
const SIDE_RANGE: f64 = 10.0;
/// Checkpoint coordinates are divided by this before clipping.
const NAV_SCALE: f64 = 50.0;
/// Traffic looks for a leader this far ahead along its chain.
const LEADER_RANGE: f64 = 50.0;
/// Ego progress is only tracked while this close to the route line.
const ROUTE_BAND: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub physics_dt: f64,
    /// Physics sub-steps per control tick.
    pub substeps: usize,
    pub horizon: usize,
    pub lidar: LidarConfig,
    pub v_max: f64,
    pub c1: f64,
    pub c2: f64,
    pub success_reward: f64,
    pub out_of_road_penalty: f64,
    /// One-time penalty on the first vehicle collision of an episode.
    pub crash_penalty: bool,
    pub crash_penalty_value: f64,
    /// Distance short of the route end that counts as arrival (m).
    pub success_margin: f64,
    /// Expected traffic vehicles per 100 m of lane chain.
    pub traffic_density: f64,
    pub idm: IdmParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            physics_dt: 0.1,
            substeps: 2,
            horizon: 1000,
            lidar: LidarConfig::default(),
            v_max: 80.0 / 3.6,
            c1: 1.0,
            c2: 0.1,
            success_reward: 10.0,
            out_of_road_penalty: 5.0,
            crash_penalty: false,
            crash_penalty_value: 5.0,
            success_margin: 5.0,
            traffic_density: 0.3,
            idm: IdmParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.substeps as f64
    }

    pub fn observation_width(&self) -> usize {
        self.lidar.num_rays + EGO_FEATURES + NAV_FEATURES
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            ("physics_dt", self.physics_dt),
            ("v_max", self.v_max),
            ("lidar.range", self.lidar.range),
            ("idm.v0", self.idm.v0),
            ("idm.a_max", self.idm.a_max),
            ("idm.b", self.idm.b),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnvError::Config(format!("{name} must be positive")));
            }
        }
        if self.substeps == 0 || self.horizon == 0 || self.lidar.num_rays == 0 {
            return Err(EnvError::Config("substeps, horizon and lidar.num_rays must be at least 1".into()));
        }
        if self.lidar.noise_std < 0.0 || self.traffic_density < 0.0 {
            return Err(EnvError::Config("noise and traffic density must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error("invalid environment config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub lidar: Vec<f64>,
    pub ego: [f64; EGO_FEATURES],
    pub navigation: [f64; NAV_FEATURES],
}

impl Observation {
    pub fn len(&self) -> usize {
        self.lidar.len() + EGO_FEATURES + NAV_FEATURES
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat feature vector: lidar, then ego summary, then navigation.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.lidar);
        v.extend_from_slice(&self.ego);
        v.extend_from_slice(&self.navigation);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    None,
    Success,
    OutOfRoad,
    Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventFlags {
    pub crash_vehicle: bool,
    pub crash_obstacle: bool,
    pub crash_sidewalk: bool,
    pub on_yellow_line: bool,
}

impl EventFlags {
    /// One unit of cost per active collision flag.
    pub fn cost(&self) -> f64 {
        [self.crash_vehicle, self.crash_obstacle, self.crash_sidewalk]
            .iter()
            .filter(|&&f| f)
            .count() as f64
    }

    pub fn any_collision(&self) -> bool {
        self.crash_vehicle || self.crash_obstacle || self.crash_sidewalk
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub cost: f64,
    pub done: bool,
    pub termination: Termination,
    pub events: EventFlags,
    /// Route arclength covered so far (m).
    pub progress: f64,
}

/// Inputs to the reward: route progress before and after the tick and the
/// ego speed after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInput {
    pub prev_s: Option<f64>,
    pub next_s: Option<f64>,
    pub speed: f64,
}

pub fn compute_reward(input: RewardInput, termination: Termination, cfg: &EnvConfig) -> f64 {
    match termination {
        Termination::Success => cfg.success_reward,
        Termination::OutOfRoad => -cfg.out_of_road_penalty,
        Termination::Horizon => 0.0,
        Termination::None => {
            let disp = match (input.prev_s, input.next_s) {
                (Some(a), Some(b)) => b - a,
                _ => 0.0,
            };
            cfg.c1 * disp + cfg.c2 * input.speed / cfg.v_max
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficVehicle {
    pub chain: usize,
    pub s: f64,
    pub speed: f64,
    pub emergency: bool,
}

/// Something a traffic vehicle can queue behind on a chain.
#[derive(Debug, Clone, Copy)]
struct Occupant {
    s: f64,
    speed: f64,
    /// Distance from the occupant's chain position back to its rear.
    rear: f64,
}

pub struct DriveEnv {
    cfg: EnvConfig,
    map: Arc<SceneMap>,
    static_targets: Vec<LidarTarget>,
    /// Per chain, obstacles lying in its lane band as (s, radius).
    chain_obstacles: Vec<Vec<(f64, f64)>>,
    ego: VehicleState,
    route: usize,
    traffic: Vec<TrafficVehicle>,
    rng: ChaCha8Rng,
    steps: usize,
    done: bool,
    progress: Option<f64>,
    tracked_s: f64,
    checkpoints: Vec<f64>,
    episode_cost: f64,
    episode_reward: f64,
    crashed_vehicle: bool,
}

impl DriveEnv {
    pub fn new(map: Arc<SceneMap>, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let static_targets = map
            .boundaries()
            .iter()
            .map(|b| LidarTarget::Segment(b.a, b.b))
            .chain(map.obstacles().iter().map(|o| LidarTarget::Circle(o.position(), o.radius)))
            .collect();
        let chain_obstacles = map
            .chains()
            .iter()
            .map(|c| {
                map.obstacles()
                    .iter()
                    .filter_map(|o| {
                        let f = c.path.project(o.position());
                        (f.d.abs() < c.path.width / 2.0 + o.radius && f.s >= 0.0 && f.s <= c.path.length())
                            .then_some((f.s, o.radius))
                    })
                    .collect()
            })
            .collect();
        let spawn = map.spawns()[0];
        let mut env = DriveEnv {
            cfg,
            map,
            static_targets,
            chain_obstacles,
            ego: VehicleState::new(spawn, 0.0, VehicleKind::Ego),
            route: 0,
            traffic: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(0),
            steps: 0,
            done: true,
            progress: None,
            tracked_s: 0.0,
            checkpoints: Vec::new(),
            episode_cost: 0.0,
            episode_reward: 0.0,
            crashed_vehicle: false,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn map(&self) -> &Arc<SceneMap> {
        &self.map
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego
    }

    /// Index of the spawn whose route the ego follows.
    pub fn route_index(&self) -> usize {
        self.route
    }

    pub fn traffic(&self) -> &[TrafficVehicle] {
        &self.traffic
    }

    pub fn traffic_states(&self) -> Vec<VehicleState> {
        self.traffic.iter().map(|t| self.traffic_state(t)).collect()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Route arclength covered, when the ego is near its route.
    pub fn progress(&self) -> Option<f64> {
        self.progress
    }

    pub fn episode_cost(&self) -> f64 {
        self.episode_cost
    }

    pub fn episode_reward(&self) -> f64 {
        self.episode_reward
    }

    pub fn route_length(&self) -> f64 {
        self.map.route_length(self.route)
    }

    /// Starts an episode. Spawn choice, traffic placement and lidar noise all
    /// derive from `(map seed, episode_seed)`.
    pub fn reset(&mut self, episode_seed: u64) -> Observation {
        let mix = episode_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ self.map.seed();
        self.rng = ChaCha8Rng::seed_from_u64(mix);
        self.route = self.rng.random_range(0..self.map.spawns().len());
        self.ego = VehicleState::new(self.map.spawns()[self.route], 0.0, VehicleKind::Ego);
        self.steps = 0;
        self.done = false;
        self.episode_cost = 0.0;
        self.episode_reward = 0.0;
        self.crashed_vehicle = false;
        self.checkpoints = self.map.checkpoints(self.route);
        self.tracked_s = 0.0;
        self.progress = self.track_progress();
        self.spawn_traffic();
        self.observe()
    }

    fn spawn_traffic(&mut self) {
        self.traffic.clear();
        if self.cfg.traffic_density <= 0.0 {
            return;
        }
        let slot = 10.0;
        let p = (self.cfg.traffic_density * slot / 100.0).min(1.0);
        let ego = self.ego.position;
        for (c, chain) in self.map.chains().iter().enumerate() {
            let len = chain.path.length();
            let mut s = self.rng.random_range(0.0..slot);
            while s < len - 10.0 {
                let place = self.rng.random_bool(p);
                let speed = self.rng.random_range(0.5..1.0) * self.cfg.idm.v0;
                if place {
                    let pos = chain.path.embed(s, 0.0);
                    let clear_ego = pos.dist(ego) > 15.0;
                    let clear_obstacles = self.map.obstacles().iter().all(|o| o.position().dist(pos) > 15.0);
                    let clear_traffic = self
                        .traffic
                        .iter()
                        .all(|t| self.map.chains()[t.chain].path.embed(t.s, 0.0).dist(pos) > 10.0);
                    if clear_ego && clear_obstacles && clear_traffic {
                        self.traffic.push(TrafficVehicle {
                            chain: c,
                            s,
                            speed,
                            emergency: false,
                        });
                    }
                }
                s += slot;
            }
        }
    }

    /// Moves the ego, for tests and tooling. Progress tracking restarts from
    /// the new pose.
    pub fn place_ego(&mut self, pose: Pose, speed: f64) {
        self.ego = VehicleState::new(pose, speed.clamp(0.0, self.cfg.v_max), VehicleKind::Ego);
        let f = self.map.spawn_route(self.route).path.project(self.ego.position);
        self.tracked_s = f.s;
        self.progress = self.track_progress();
    }

    pub fn clear_traffic(&mut self) {
        self.traffic.clear();
    }

    pub fn add_traffic(&mut self, chain: usize, s: f64, speed: f64) {
        self.traffic.push(TrafficVehicle {
            chain,
            s,
            speed,
            emergency: false,
        });
    }

    fn traffic_state(&self, t: &TrafficVehicle) -> VehicleState {
        let path = &self.map.chains()[t.chain].path;
        let pose = path.embed(t.s, 0.0);
        let mut v = VehicleState::new(
            Pose::new(pose.x, pose.y, path.heading_at(t.s)),
            t.speed,
            VehicleKind::Traffic,
        );
        v.alive = t.s <= path.length();
        v
    }

    fn track_progress(&mut self) -> Option<f64> {
        let path = &self.map.spawn_route(self.route).path;
        let f = path.project_window(self.ego.position, self.tracked_s - 10.0, self.tracked_s + 30.0);
        if f.d.abs() > ROUTE_BAND || !self.map.on_drivable(self.ego.position) {
            return None;
        }
        let s = f.s.clamp(0.0, path.length());
        self.tracked_s = s;
        Some(s)
    }

    fn leader_for(&self, idx: usize, ego_proj: &[Option<(f64, f64)>]) -> Option<Leader> {
        let me = &self.traffic[idx];
        let chain = &self.map.chains()[me.chain];
        let mut best: Option<(f64, Occupant)> = None;
        let mut consider = |o: Occupant| {
            let ds = o.s - me.s;
            if ds > 0.0 && ds <= LEADER_RANGE && best.is_none_or(|(d, _)| ds < d) {
                best = Some((ds, o));
            }
        };
        for (j, other) in self.traffic.iter().enumerate() {
            if j == idx {
                continue;
            }
            if other.chain == me.chain {
                consider(Occupant {
                    s: other.s,
                    speed: other.speed,
                    rear: VEHICLE_LENGTH / 2.0,
                });
            } else {
                let pos = self.map.chains()[other.chain].path.embed(other.s, 0.0);
                if !chain.path.near_bbox(pos, chain.path.width) {
                    continue;
                }
                let f = chain.path.project_window(pos, me.s, me.s + LEADER_RANGE);
                if f.d.abs() < chain.path.width / 2.0 {
                    consider(Occupant {
                        s: f.s,
                        speed: other.speed,
                        rear: VEHICLE_LENGTH / 2.0,
                    });
                }
            }
        }
        if let Some((s, speed)) = ego_proj[me.chain] {
            consider(Occupant {
                s,
                speed,
                rear: VEHICLE_LENGTH / 2.0,
            });
        }
        for &(s, r) in &self.chain_obstacles[me.chain] {
            consider(Occupant { s, speed: 0.0, rear: r });
        }
        best.map(|(ds, o)| Leader {
            speed: o.speed,
            gap: ds - o.rear - VEHICLE_LENGTH / 2.0,
        })
    }

    /// The ego's position along each chain, when it sits in that chain's lane.
    fn ego_on_chains(&self) -> Vec<Option<(f64, f64)>> {
        let p = self.ego.position;
        self.map
            .chains()
            .iter()
            .map(|c| {
                if !c.path.near_bbox(p, c.path.width) {
                    return None;
                }
                let f = c.path.project(p);
                let inside = f.d.abs() < c.path.width / 2.0 + VEHICLE_WIDTH / 2.0 && f.s >= 0.0 && f.s <= c.path.length();
                let along = (self.ego.heading - c.path.heading_at(f.s)).cos();
                inside.then_some((f.s, (self.ego.speed * along).max(0.0)))
            })
            .collect()
    }

    fn advance_traffic(&mut self, dt: f64) {
        let ego_proj = self.ego_on_chains();
        let accels: Vec<(f64, bool)> = (0..self.traffic.len())
            .map(|i| {
                let out = idm_acceleration(self.traffic[i].speed, self.leader_for(i, &ego_proj), &self.cfg.idm);
                (out.accel, out.emergency)
            })
            .collect();
        for (t, (a, emergency)) in self.traffic.iter_mut().zip(accels) {
            t.speed = (t.speed + a * dt).max(0.0);
            t.s += t.speed * dt;
            t.emergency = emergency;
        }
        let chains = self.map.chains();
        self.traffic.retain(|t| t.s <= chains[t.chain].path.length());
    }

    fn detect_events(&self) -> EventFlags {
        let body = self.ego.footprint();
        let center = self.ego.position;
        let mut ev = EventFlags::default();
        ev.crash_vehicle = self
            .traffic
            .iter()
            .any(|t| body.overlaps(&self.traffic_state(t).footprint()));
        ev.crash_obstacle = self
            .map
            .obstacles()
            .iter()
            .any(|o| body.overlaps_circle(o.position(), o.radius));
        for b in self.map.boundaries() {
            if crate::geom::point_segment_distance(center, b.a, b.b) > VEHICLE_LENGTH {
                continue;
            }
            if body.intersects_segment(b.a, b.b) {
                match b.kind {
                    BoundaryKind::YellowSolid => ev.on_yellow_line = true,
                    BoundaryKind::None => ev.crash_sidewalk = true,
                    BoundaryKind::WhiteBroken => {}
                }
            }
        }
        ev
    }

    /// Advances one control tick.
    pub fn step(&mut self, action: [f64; 2]) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        let steer = if action[0].is_finite() { action[0].clamp(-1.0, 1.0) } else { 0.0 };
        let accel = if action[1].is_finite() { action[1].clamp(-1.0, 1.0) } else { 0.0 };
        let prev = self.progress;
        let dt = self.cfg.physics_dt;
        for _ in 0..self.cfg.substeps {
            self.ego.bicycle_step(steer, accel, dt, self.cfg.v_max);
            self.advance_traffic(dt);
        }
        self.steps += 1;
        self.progress = self.track_progress();

        let events = self.detect_events();
        let out = events.on_yellow_line || !self.map.on_drivable(self.ego.position);
        let arrived = self
            .progress
            .is_some_and(|s| s >= self.route_length() - self.cfg.success_margin);
        let termination = if out {
            Termination::OutOfRoad
        } else if arrived {
            Termination::Success
        } else if self.steps >= self.cfg.horizon {
            Termination::Horizon
        } else {
            Termination::None
        };
        let mut reward = compute_reward(
            RewardInput {
                prev_s: prev,
                next_s: self.progress,
                speed: self.ego.speed,
            },
            termination,
            &self.cfg,
        );
        if self.cfg.crash_penalty && events.crash_vehicle && !self.crashed_vehicle {
            reward -= self.cfg.crash_penalty_value;
        }
        self.crashed_vehicle |= events.crash_vehicle;
        let cost = events.cost();
        self.episode_cost += cost;
        self.episode_reward += reward;
        self.done = termination != Termination::None;
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            cost,
            done: self.done,
            termination,
            events,
            progress: self.progress.unwrap_or(self.tracked_s),
        })
    }

    fn lidar_targets(&self) -> Vec<LidarTarget> {
        let mut targets = self.static_targets.clone();
        targets.extend(self.traffic.iter().map(|t| LidarTarget::Box(self.traffic_state(t).footprint())));
        targets
    }

    /// Distance from the ego along its lateral axis to the nearest outer
    /// boundary, left then right, capped at 10 m.
    pub fn side_distances(&self) -> (f64, f64) {
        let origin = self.ego.position;
        let left = Vec2::from_angle(self.ego.heading).perp();
        let mut best = (SIDE_RANGE, SIDE_RANGE);
        for b in self.map.boundaries() {
            if crate::geom::point_segment_distance(origin, b.a, b.b) > SIDE_RANGE {
                continue;
            }
            if let Some(t) = crate::geom::ray_segment(origin, left, b.a, b.b) {
                best.0 = best.0.min(t);
            }
            if let Some(t) = crate::geom::ray_segment(origin, -left, b.a, b.b) {
                best.1 = best.1.min(t);
            }
        }
        best
    }

    /// Heading of the ego relative to the lane it is localized on, or to
    /// its route when it is not localized.
    pub fn heading_error(&self) -> f64 {
        let lane_heading = match self.map.localize(self.ego.position, Some(self.ego.heading)) {
            Some(loc) => self.map.lane(loc.lane).heading_at(loc.s),
            None => self.map.spawn_route(self.route).path.heading_at(self.tracked_s),
        };
        normalize_angle(self.ego.heading - lane_heading)
    }

    /// Upcoming checkpoints in the ego frame (m), nearest first.
    pub fn next_checkpoints(&self) -> [Vec2; 2] {
        let path = &self.map.spawn_route(self.route).path;
        let ahead: Vec<f64> = self
            .checkpoints
            .iter()
            .copied()
            .filter(|&c| c > self.tracked_s)
            .collect();
        let last = *self.checkpoints.last().expect("route has a destination checkpoint");
        let pick = |i: usize| ahead.get(i).or(ahead.last()).copied().unwrap_or(last);
        let pose = self.ego.pose();
        [pose.to_local(path.embed(pick(0), 0.0)), pose.to_local(path.embed(pick(1), 0.0))]
    }

    pub fn observe(&mut self) -> Observation {
        let targets = self.lidar_targets();
        let noise = self.cfg.lidar.noise_std > 0.0;
        let lidar = lidar_scan(
            self.ego.pose(),
            &targets,
            &self.cfg.lidar,
            if noise { Some(&mut self.rng) } else { None },
        );
        let (left, right) = self.side_distances();
        let ego = [
            self.ego.speed / self.cfg.v_max,
            self.ego.steer,
            self.heading_error() / std::f64::consts::PI,
            left / SIDE_RANGE,
            right / SIDE_RANGE,
        ];
        let cps = self.next_checkpoints();
        let n = |v: f64| (v / NAV_SCALE).clamp(-1.0, 1.0);
        Observation {
            lidar,
            ego,
            navigation: [n(cps[0].x), n(cps[0].y), n(cps[1].x), n(cps[1].y)],
        }
    }

    /// Footprints of all traffic vehicles, for rendering and tests.
    pub fn traffic_boxes(&self) -> Vec<OrientedBox> {
        self.traffic.iter().map(|t| self.traffic_state(t).footprint()).collect()
    }
}
