//! Procedural map generation from a seeded sequence of road blocks.
//!
//! A road is traced by its left edge (the yellow center line); lanes lie to
//! its right at offsets `(k + ½)·w`. Each block appends one or more sections
//! along the route, and intersections add short stub arms that dead-end.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Pose, Vec2};
use crate::lane::BoundaryKind;
use crate::map::{LaneRecord, MapError, MapFile, Obstacle, ObstacleKind, SceneMap, MAP_FORMAT};

/// Bumped whenever generation output changes for a fixed seed.
pub const BLOCK_LIBRARY_VERSION: u32 = 1;

const SAMPLE_SPACING: f64 = 2.0;
const ATTEMPTS_PER_BLOCK: usize = 40;
const STUB_LENGTH: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Left,
    Straight,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockSpec {
    Straight { length: f64 },
    /// Constant-curvature arc of the road's left edge; positive turns left.
    Curve { length: f64, curvature: f64 },
    Intersection { turn: Turn, radius: f64 },
    /// Right-hand entry, counter-clockwise ring sweep, right-hand exit.
    Roundabout { radius: f64, sweep: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgConfig {
    pub lanes_per_road: usize,
    pub lane_width: f64,
    pub obstacle_count: usize,
}

impl Default for PgConfig {
    fn default() -> Self {
        PgConfig {
            lanes_per_road: 2,
            lane_width: 3.5,
            obstacle_count: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("num_blocks must be at least 1")]
    NoBlocks,
    #[error("seed {seed}: could not place block {block} without overlap")]
    Overlap { seed: u64, block: usize },
    #[error("seed {seed}: generated map failed validation: {source}")]
    Invalid {
        seed: u64,
        #[source]
        source: MapError,
    },
}

/// One constant-curvature piece of road reference line.
#[derive(Debug, Clone, Copy)]
struct Section {
    start: Pose,
    length: f64,
    curvature: f64,
}

impl Section {
    fn pose_at(&self, s: f64) -> Pose {
        let h = self.start.heading;
        let k = self.curvature;
        let (x, y) = if k == 0.0 {
            (s * h.cos(), s * h.sin())
        } else {
            (((h + k * s).sin() - h.sin()) / k, (h.cos() - (h + k * s).cos()) / k)
        };
        Pose::new(self.start.x + x, self.start.y + y, h + k * s)
    }

    fn end(&self) -> Pose {
        self.pose_at(self.length)
    }

    fn samples(&self) -> Vec<Pose> {
        if self.curvature == 0.0 {
            return vec![self.start, self.end()];
        }
        let n = (self.length / SAMPLE_SPACING).ceil().max(1.0) as usize;
        (0..=n).map(|i| self.pose_at(self.length * i as f64 / n as f64)).collect()
    }

    fn lane_points(&self, offset: f64) -> Vec<Vec2> {
        self.samples()
            .into_iter()
            .map(|p| p.position() + Vec2::from_angle(p.heading).perp() * offset)
            .collect()
    }
}

fn block_sections(start: Pose, spec: &BlockSpec, cfg: &PgConfig) -> (Vec<Section>, Vec<Vec<Section>>) {
    let road_width = cfg.lanes_per_road as f64 * cfg.lane_width;
    let chain = |start: Pose, parts: &[(f64, f64)]| {
        let mut out = Vec::new();
        let mut pose = start;
        for &(length, curvature) in parts {
            let sec = Section { start: pose, length, curvature };
            pose = sec.end();
            out.push(sec);
        }
        out
    };
    match *spec {
        BlockSpec::Straight { length } => (chain(start, &[(length, 0.0)]), vec![]),
        BlockSpec::Curve { length, curvature } => (chain(start, &[(length, curvature)]), vec![]),
        BlockSpec::Intersection { turn, radius } => {
            let right_radius = radius + road_width;
            let arm = |t: Turn| match t {
                Turn::Left => (FRAC_PI_2 * radius, 1.0 / radius),
                Turn::Right => (FRAC_PI_2 * right_radius, -1.0 / right_radius),
                Turn::Straight => (radius + road_width, 0.0),
            };
            let route = chain(start, &[arm(turn)]);
            let stubs = [Turn::Left, Turn::Straight, Turn::Right]
                .into_iter()
                .filter(|&t| t != turn)
                .map(|t| chain(start, &[arm(t), (STUB_LENGTH, 0.0)]))
                .collect();
            (route, stubs)
        }
        BlockSpec::Roundabout { radius, sweep } => {
            let entry = 20.0 + road_width;
            let parts = [
                (FRAC_PI_6 * entry, -1.0 / entry),
                (sweep * radius, 1.0 / radius),
                (FRAC_PI_6 * entry, -1.0 / entry),
            ];
            (chain(start, &parts), vec![])
        }
    }
}

fn random_block<R: Rng>(rng: &mut R, cfg: &PgConfig) -> BlockSpec {
    let road_width = cfg.lanes_per_road as f64 * cfg.lane_width;
    let roll: f64 = rng.random();
    if roll < 0.3 {
        BlockSpec::Straight {
            length: rng.random_range(30.0..70.0),
        }
    } else if roll < 0.65 {
        let radius = rng.random_range((road_width + 25.0)..120.0);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        BlockSpec::Curve {
            length: rng.random_range(30.0..60.0),
            curvature: sign / radius,
        }
    } else if roll < 0.85 {
        let turn = match rng.random_range(0..3) {
            0 => Turn::Left,
            1 => Turn::Straight,
            _ => Turn::Right,
        };
        BlockSpec::Intersection {
            turn,
            radius: rng.random_range(12.0..18.0),
        }
    } else {
        BlockSpec::Roundabout {
            radius: rng.random_range(18.0..26.0),
            sweep: rng.random_range(FRAC_PI_2..PI),
        }
    }
}

/// Sampled footprint points tagged with their arclength along the route.
struct Footprint {
    points: Vec<(Vec2, f64)>,
}

impl Footprint {
    fn sample(sections: &[Section], start_arc: f64, cfg: &PgConfig) -> Vec<(Vec2, f64)> {
        let road_width = cfg.lanes_per_road as f64 * cfg.lane_width;
        let mut out = Vec::new();
        let mut arc = start_arc;
        for sec in sections {
            let n = (sec.length / SAMPLE_SPACING).ceil().max(1.0) as usize;
            for i in 0..=n {
                let s = sec.length * i as f64 / n as f64;
                let p = sec.pose_at(s);
                let normal = Vec2::from_angle(p.heading).perp();
                for off in [0.0, -road_width / 2.0, -road_width] {
                    out.push((p.position() + normal * off, arc + s));
                }
            }
            arc += sec.length;
        }
        out
    }

    fn conflicts(&self, candidate: &[(Vec2, f64)], clearance: f64) -> bool {
        candidate.iter().any(|&(p, a)| {
            self.points
                .iter()
                .any(|&(q, b)| (a - b).abs() > 2.5 * clearance && p.dist(q) < clearance)
        })
    }
}

/// Generates a map with the default block configuration.
pub fn pg_generate(seed: u64, num_blocks: usize) -> Result<SceneMap, GenerationError> {
    pg_generate_with(seed, num_blocks, &PgConfig::default())
}

pub fn pg_generate_with(seed: u64, num_blocks: usize, cfg: &PgConfig) -> Result<SceneMap, GenerationError> {
    if num_blocks == 0 {
        return Err(GenerationError::NoBlocks);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let road_width = cfg.lanes_per_road as f64 * cfg.lane_width;
    let clearance = road_width + 6.0;

    let mut blocks: Vec<BlockSpec> = Vec::with_capacity(num_blocks);
    let mut route_sections: Vec<Section> = Vec::new();
    let mut stub_sections: Vec<Vec<Section>> = Vec::new();
    let mut footprint = Footprint { points: Vec::new() };
    let mut pose = Pose::new(0.0, road_width / 2.0, 0.0);
    let mut arc = 0.0;

    for b in 0..num_blocks {
        let mut placed = false;
        for _ in 0..ATTEMPTS_PER_BLOCK {
            let spec = if b == 0 {
                BlockSpec::Straight {
                    length: rng.random_range(40.0..60.0),
                }
            } else {
                random_block(&mut rng, cfg)
            };
            let (route, stubs) = block_sections(pose, &spec, cfg);
            let mut cand = Footprint::sample(&route, arc, cfg);
            for stub in &stubs {
                cand.extend(Footprint::sample(stub, arc, cfg));
            }
            if footprint.conflicts(&cand, clearance) {
                continue;
            }
            footprint.points.extend(cand);
            arc += route.iter().map(|s| s.length).sum::<f64>();
            pose = route.last().unwrap().end();
            route_sections.extend(route);
            stub_sections.extend(stubs);
            blocks.push(spec);
            placed = true;
            break;
        }
        if !placed {
            return Err(GenerationError::Overlap { seed, block: b });
        }
    }

    let mut lanes: Vec<LaneRecord> = Vec::new();
    let mut edges: Vec<[u32; 2]> = Vec::new();
    let mut route_lane_ids: Vec<Vec<u32>> = Vec::new();
    let add_section = |sec: &Section, lanes: &mut Vec<LaneRecord>, edges: &mut Vec<[u32; 2]>| -> Vec<u32> {
        let mut ids = Vec::new();
        for k in 0..cfg.lanes_per_road {
            let id = lanes.len() as u32;
            let offset = -(k as f64 + 0.5) * cfg.lane_width;
            let points = sec.lane_points(offset).into_iter().map(|p| [p.x, p.y]).collect();
            lanes.push(LaneRecord {
                id,
                width: cfg.lane_width,
                boundary_left: if k == 0 { BoundaryKind::YellowSolid } else { BoundaryKind::WhiteBroken },
                boundary_right: if k + 1 == cfg.lanes_per_road {
                    BoundaryKind::None
                } else {
                    BoundaryKind::WhiteBroken
                },
                points,
            });
            if k > 0 {
                edges.push([id - 1, id]);
                edges.push([id, id - 1]);
            }
            ids.push(id);
        }
        ids
    };
    for sec in &route_sections {
        route_lane_ids.push(add_section(sec, &mut lanes, &mut edges));
    }
    for stub in &stub_sections {
        for sec in stub {
            add_section(sec, &mut lanes, &mut edges);
        }
    }

    let first = &route_sections[0];
    let spawns = (0..cfg.lanes_per_road)
        .map(|k| {
            let p = first.pose_at(5.0);
            let c = p.position() + Vec2::from_angle(p.heading).perp() * (-(k as f64 + 0.5) * cfg.lane_width);
            Pose::new(c.x, c.y, p.heading)
        })
        .collect();
    let last = route_sections.last().unwrap().end();
    let dest = last.position() + Vec2::from_angle(last.heading).perp() * (-0.5 * cfg.lane_width);
    let destination = Pose::new(dest.x, dest.y, last.heading);

    let mut obstacles: Vec<Obstacle> = Vec::new();
    let candidates: Vec<usize> = (1..route_sections.len()).filter(|&i| route_sections[i].length > 25.0).collect();
    let mut tries = 0;
    while obstacles.len() < cfg.obstacle_count && !candidates.is_empty() && tries < 100 {
        tries += 1;
        let sec = route_sections[candidates[rng.random_range(0..candidates.len())]];
        let s = rng.random_range(10.0..sec.length - 10.0);
        let k = rng.random_range(0..cfg.lanes_per_road);
        let d = -(k as f64 + 0.5) * cfg.lane_width + rng.random_range(-0.5..0.5);
        let p = sec.pose_at(s);
        let pos = p.position() + Vec2::from_angle(p.heading).perp() * d;
        if obstacles.iter().any(|o| o.position().dist(pos) < 20.0) {
            continue;
        }
        let (kind, radius) = if rng.random_bool(0.5) {
            (ObstacleKind::Cone, 0.3)
        } else {
            (ObstacleKind::WarningTriangle, 0.5)
        };
        obstacles.push(Obstacle { x: pos.x, y: pos.y, radius, kind });
    }

    // consecutive route sections join by geometry; edges listed for readability
    for w in route_lane_ids.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            edges.push([*a, *b]);
        }
    }

    let raw = MapFile {
        format: MAP_FORMAT.to_string(),
        seed,
        blocks,
        lanes,
        edges,
        spawns,
        destination,
        obstacles,
    };
    SceneMap::from_file(raw).map_err(|source| GenerationError::Invalid { seed, source })
}
