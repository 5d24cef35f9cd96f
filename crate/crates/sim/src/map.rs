//! Scene maps: lane fragments, route graph, spawns, destination and static
//! obstacles, plus geometry derived from them (outer boundaries, route chains
//! and checkpoints).

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, Pose, Vec2};
use crate::lane::{BoundaryKind, Frenet, Lane, LaneError};
use crate::pg::BlockSpec;

pub const MAP_FORMAT: &str = "scenemap-v1";
/// Lateral range within which a position can be matched to a lane.
pub const LOCALIZE_RANGE: f64 = 5.0;
/// Spacing of navigation checkpoints along the route.
pub const CHECKPOINT_SPACING: f64 = 50.0;
const JOIN_TOLERANCE: f64 = 0.05;
const BOUNDARY_PIECE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Cone,
    WarningTriangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub kind: ObstacleKind,
}

impl Obstacle {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneRecord {
    pub id: u32,
    pub width: f64,
    pub boundary_left: BoundaryKind,
    pub boundary_right: BoundaryKind,
    pub points: Vec<[f64; 2]>,
}

/// On-disk `scenemap-v1` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub format: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,
    pub lanes: Vec<LaneRecord>,
    #[serde(default)]
    pub edges: Vec<[u32; 2]>,
    pub spawns: Vec<Pose>,
    pub destination: Pose,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("route graph disconnected: spawn {spawn} cannot reach the destination")]
    Disconnected { spawn: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> MapError {
    MapError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// An outer edge piece of the drivable area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegment {
    pub a: Vec2,
    pub b: Vec2,
    pub kind: BoundaryKind,
}

/// A lane chain followed by longitudinal successors, with its concatenated
/// centerline as a single Frenet frame.
#[derive(Debug, Clone)]
pub struct Chain {
    pub lanes: Vec<usize>,
    pub path: Lane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localization {
    pub lane: usize,
    pub s: f64,
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct SceneMap {
    raw: MapFile,
    lanes: Vec<Lane>,
    successors: Vec<Vec<usize>>,
    lateral: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    destination_lanes: Vec<usize>,
    boundaries: Vec<BoundarySegment>,
    chains: Vec<Chain>,
    spawn_routes: Vec<Chain>,
}

impl PartialEq for SceneMap {
    fn eq(&self, other: &SceneMap) -> bool {
        self.raw == other.raw
    }
}

impl SceneMap {
    pub fn from_file(raw: MapFile) -> Result<Self, MapError> {
        if raw.format != MAP_FORMAT {
            return Err(invalid("format", format!("expected '{MAP_FORMAT}', got '{}'", raw.format)));
        }
        let mut lanes = Vec::with_capacity(raw.lanes.len());
        let mut index: HashMap<u32, usize> = HashMap::new();
        for (i, rec) in raw.lanes.iter().enumerate() {
            let pts: Vec<Vec2> = rec.points.iter().map(|p| Vec2::new(p[0], p[1])).collect();
            if pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err(invalid(format!("lanes[{i}].points"), "non-finite coordinate"));
            }
            let lane = Lane::new(rec.id, rec.width, rec.boundary_left, rec.boundary_right, pts).map_err(|e| {
                let field = match e {
                    LaneError::BadWidth(_) => format!("lanes[{i}].width"),
                    _ => format!("lanes[{i}].points"),
                };
                invalid(field, e.to_string())
            })?;
            if index.insert(rec.id, i).is_some() {
                return Err(invalid(format!("lanes[{i}].id"), format!("duplicate lane id {}", rec.id)));
            }
            lanes.push(lane);
        }
        if lanes.is_empty() {
            return Err(invalid("lanes", "map has no lanes"));
        }

        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (i, e) in raw.edges.iter().enumerate() {
            let from = *index
                .get(&e[0])
                .ok_or_else(|| invalid(format!("edges[{i}]"), format!("unknown lane id {}", e[0])))?;
            let to = *index
                .get(&e[1])
                .ok_or_else(|| invalid(format!("edges[{i}]"), format!("unknown lane id {}", e[1])))?;
            if !edges.contains(&(from, to)) {
                edges.push((from, to));
            }
        }
        // longitudinal connections implied by geometry
        for (i, a) in lanes.iter().enumerate() {
            for (j, b) in lanes.iter().enumerate() {
                if i != j && a.end().dist(b.start()) < JOIN_TOLERANCE && !edges.contains(&(i, j)) {
                    edges.push((i, j));
                }
            }
        }
        edges.sort_unstable();

        let n = lanes.len();
        let mut successors = vec![Vec::new(); n];
        let mut lateral = vec![Vec::new(); n];
        for &(a, b) in &edges {
            if lanes[a].end().dist(lanes[b].start()) < JOIN_TOLERANCE {
                successors[a].push(b);
            } else {
                lateral[a].push(b);
            }
        }

        let dest = raw.destination.position();
        let destination_lanes: Vec<usize> = (0..n)
            .filter(|&i| {
                let f = lanes[i].project(dest);
                f.s >= -1e-6 && f.s <= lanes[i].length() + 1e-6 && f.d.abs() <= lanes[i].width / 2.0 + 1e-6
            })
            .collect();
        if destination_lanes.is_empty() {
            return Err(invalid("destination", "destination is not on any lane"));
        }
        for (i, o) in raw.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return Err(invalid(format!("obstacles[{i}].radius"), "radius must be positive"));
            }
        }

        let mut map = SceneMap {
            raw,
            lanes,
            successors,
            lateral,
            edges,
            destination_lanes,
            boundaries: Vec::new(),
            chains: Vec::new(),
            spawn_routes: Vec::new(),
        };

        let reach = map.reaches_destination();
        if map.raw.spawns.is_empty() {
            return Err(invalid("spawns", "at least one spawn point is required"));
        }
        for (k, spawn) in map.raw.spawns.clone().iter().enumerate() {
            let loc = map
                .localize(spawn.position(), Some(spawn.heading))
                .ok_or_else(|| invalid(format!("spawns[{k}]"), "spawn is not on a lane"))?;
            if !reach[loc.lane] {
                return Err(MapError::Disconnected { spawn: k });
            }
            let route = map.build_chain(loc.lane, &reach);
            map.spawn_routes.push(route);
        }
        let roots: Vec<usize> = (0..n)
            .filter(|&i| reach[i] && !map.successors.iter().any(|s| s.contains(&i)))
            .collect();
        map.chains = roots.into_iter().map(|r| map.build_chain(r, &reach)).collect();
        map.boundaries = map.derive_boundaries();
        Ok(map)
    }

    /// `reach[i]` is true when lane `i` has a path to a destination lane.
    fn reaches_destination(&self) -> Vec<bool> {
        let n = self.lanes.len();
        let mut preds = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            preds[b].push(a);
        }
        let mut reach = vec![false; n];
        let mut queue: VecDeque<usize> = self.destination_lanes.iter().copied().collect();
        for &d in &self.destination_lanes {
            reach[d] = true;
        }
        while let Some(l) = queue.pop_front() {
            for &p in &preds[l] {
                if !reach[p] {
                    reach[p] = true;
                    queue.push_back(p);
                }
            }
        }
        reach
    }

    fn build_chain(&self, start: usize, reach: &[bool]) -> Chain {
        let mut lanes = vec![start];
        let mut cur = start;
        while !self.destination_lanes.contains(&cur) {
            let next = self.successors[cur]
                .iter()
                .copied()
                .find(|&s| reach[s] && !lanes.contains(&s))
                .or_else(|| self.successors[cur].iter().copied().find(|s| !lanes.contains(s)));
            match next {
                Some(s) => {
                    lanes.push(s);
                    cur = s;
                }
                None => break,
            }
        }
        let mut pts: Vec<Vec2> = Vec::new();
        for &l in &lanes {
            for &p in self.lanes[l].points() {
                if pts.last().is_none_or(|q: &Vec2| q.dist(p) > 1e-6) {
                    pts.push(p);
                }
            }
        }
        let width = self.lanes[start].width;
        let path = Lane::new(u32::MAX, width, BoundaryKind::None, BoundaryKind::None, pts)
            .expect("chain of valid lanes is a valid polyline");
        Chain { lanes, path }
    }

    fn derive_boundaries(&self) -> Vec<BoundarySegment> {
        let mut out: Vec<BoundarySegment> = Vec::new();
        for lane in &self.lanes {
            for (kind, sign) in [(lane.boundary_left, 1.0), (lane.boundary_right, -1.0)] {
                if !kind.is_outer() {
                    continue;
                }
                let edge = lane.offset_polyline(sign * lane.width / 2.0);
                let mut run: Option<(Vec2, Vec2, Vec2)> = None; // start, end, direction
                for w in edge.windows(2) {
                    let len = w[0].dist(w[1]);
                    let pieces = (len / BOUNDARY_PIECE).ceil().max(1.0) as usize;
                    let dir = (w[1] - w[0]) * (1.0 / len);
                    let outward = dir.perp() * sign;
                    for k in 0..pieces {
                        let a = w[0].lerp(w[1], k as f64 / pieces as f64);
                        let b = w[0].lerp(w[1], (k + 1) as f64 / pieces as f64);
                        let probe = a.lerp(b, 0.5) + outward * 0.05;
                        let covered = self.lanes.iter().any(|l| l.contains(probe));
                        if covered {
                            if let Some((s, e, _)) = run.take() {
                                out.push(BoundarySegment { a: s, b: e, kind });
                            }
                            continue;
                        }
                        run = match run {
                            Some((s, e, d)) if (e.dist(a) < 1e-9) && d.cross(dir).abs() < 1e-9 => Some((s, b, d)),
                            Some((s, e, _)) => {
                                out.push(BoundarySegment { a: s, b: e, kind });
                                Some((a, b, dir))
                            }
                            None => Some((a, b, dir)),
                        };
                    }
                }
                if let Some((s, e, _)) = run {
                    out.push(BoundarySegment { a: s, b: e, kind });
                }
            }
        }
        out
    }

    pub fn seed(&self) -> u64 {
        self.raw.seed
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.raw.blocks
    }

    pub fn raw(&self) -> &MapFile {
        &self.raw
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn lane(&self, idx: usize) -> &Lane {
        &self.lanes[idx]
    }

    pub fn lane_index(&self, id: u32) -> Option<usize> {
        self.lanes.iter().position(|l| l.id == id)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn successors(&self, lane: usize) -> &[usize] {
        &self.successors[lane]
    }

    /// Parallel lanes reachable by a lane change.
    pub fn lateral_neighbors(&self, lane: usize) -> &[usize] {
        &self.lateral[lane]
    }

    pub fn spawns(&self) -> &[Pose] {
        &self.raw.spawns
    }

    pub fn destination(&self) -> Pose {
        self.raw.destination
    }

    pub fn destination_lanes(&self) -> &[usize] {
        &self.destination_lanes
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.raw.obstacles
    }

    pub fn boundaries(&self) -> &[BoundarySegment] {
        &self.boundaries
    }

    /// Chains rooted at every lane without a predecessor.
    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    /// Reference route from spawn `k` to the destination.
    pub fn spawn_route(&self, k: usize) -> &Chain {
        &self.spawn_routes[k]
    }

    /// Arclength of the destination along the route chain of spawn `k`.
    pub fn route_length(&self, k: usize) -> f64 {
        let path = &self.spawn_routes[k].path;
        let f = path.project(self.raw.destination.position());
        f.s.clamp(0.0, path.length())
    }

    /// Checkpoints every 50 m along the route from spawn `k`, ending with the
    /// destination, as route arclengths.
    pub fn checkpoints(&self, k: usize) -> Vec<f64> {
        let len = self.route_length(k);
        let mut out: Vec<f64> = Vec::new();
        let mut s = CHECKPOINT_SPACING;
        while s < len - 1e-6 {
            out.push(s);
            s += CHECKPOINT_SPACING;
        }
        out.push(len);
        out
    }

    pub fn frenet_project(&self, lane: usize, p: Vec2) -> Frenet {
        self.lanes[lane].project(p)
    }

    pub fn frenet_embed(&self, lane: usize, s: f64, d: f64) -> Vec2 {
        self.lanes[lane].embed(s, d)
    }

    /// Nearest lane within the lateral range and, when a heading is given,
    /// within ±90° of the lane direction.
    pub fn localize(&self, p: Vec2, heading: Option<f64>) -> Option<Localization> {
        let mut best: Option<Localization> = None;
        for (i, lane) in self.lanes.iter().enumerate() {
            if !lane.near_bbox(p, LOCALIZE_RANGE) {
                continue;
            }
            let f = lane.project(p);
            if f.s < -1e-9 || f.s > lane.length() + 1e-9 || f.d.abs() > LOCALIZE_RANGE {
                continue;
            }
            if let Some(h) = heading {
                if normalize_angle(h - lane.heading_at(f.s)).abs() > std::f64::consts::FRAC_PI_2 {
                    continue;
                }
            }
            if best.is_none_or(|b| f.d.abs() < b.d.abs()) {
                best = Some(Localization { lane: i, s: f.s, d: f.d });
            }
        }
        best
    }

    /// Whether `p` lies inside any lane strip.
    pub fn on_drivable(&self, p: Vec2) -> bool {
        self.lanes.iter().any(|l| l.contains(p))
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(&self.raw).expect("map serializes")
    }

    pub fn from_text(text: &str) -> Result<Self, MapError> {
        let raw: MapFile = serde_json::from_str(text).map_err(|e| MapError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_file(raw)
    }

    pub fn save(&self, path: &Path) -> Result<(), MapError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Reads and validates a `scenemap-v1` file.
pub fn load_map(path: &Path) -> Result<SceneMap, MapError> {
    SceneMap::from_text(&fs::read_to_string(path)?)
}
