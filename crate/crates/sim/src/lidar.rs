//! Planar lidar: evenly spaced rays counter-clockwise from the heading.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geom::{ray_circle, ray_segment, OrientedBox, Pose, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarConfig {
    pub num_rays: usize,
    pub range: f64,
    pub noise_std: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            num_rays: 240,
            range: 50.0,
            noise_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LidarTarget {
    Segment(Vec2, Vec2),
    Circle(Vec2, f64),
    Box(OrientedBox),
}

impl LidarTarget {
    fn hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        match *self {
            LidarTarget::Segment(a, b) => ray_segment(origin, dir, a, b),
            LidarTarget::Circle(c, r) => ray_circle(origin, dir, c, r),
            LidarTarget::Box(b) => b
                .edges()
                .iter()
                .filter_map(|&(p, q)| ray_segment(origin, dir, p, q))
                .min_by(f64::total_cmp),
        }
    }

    /// Conservative lower bound on the distance from `p` to the target.
    fn lower_bound_distance(&self, p: Vec2) -> f64 {
        match *self {
            LidarTarget::Segment(a, b) => crate::geom::point_segment_distance(p, a, b),
            LidarTarget::Circle(c, r) => (p.dist(c) - r).max(0.0),
            LidarTarget::Box(b) => (p.dist(b.center) - 0.5 * b.length.hypot(b.width)).max(0.0),
        }
    }

    /// The target reflected across the line through `pose` along its heading.
    pub fn mirrored(&self, pose: Pose) -> LidarTarget {
        let m = |v: Vec2| {
            let l = pose.to_local(v);
            pose.position() + Vec2::new(l.x, -l.y).rotate(pose.heading)
        };
        match *self {
            LidarTarget::Segment(a, b) => LidarTarget::Segment(m(b), m(a)),
            LidarTarget::Circle(c, r) => LidarTarget::Circle(m(c), r),
            LidarTarget::Box(b) => LidarTarget::Box(OrientedBox {
                center: m(b.center),
                heading: 2.0 * pose.heading - b.heading,
                ..b
            }),
        }
    }
}

/// Normalized ray distances in `[0, 1]`; a ray that hits nothing reads 1.
/// Noise is drawn only when `noise_std > 0` and a generator is supplied.
pub fn lidar_scan<R: Rng + ?Sized>(
    pose: Pose,
    targets: &[LidarTarget],
    cfg: &LidarConfig,
    rng: Option<&mut R>,
) -> Vec<f64> {
    let origin = pose.position();
    let near: Vec<&LidarTarget> = targets
        .iter()
        .filter(|t| t.lower_bound_distance(origin) < cfg.range)
        .collect();
    let step = std::f64::consts::TAU / cfg.num_rays as f64;
    let mut out: Vec<f64> = (0..cfg.num_rays)
        .map(|i| {
            let dir = Vec2::from_angle(pose.heading + step * i as f64);
            let d = near
                .iter()
                .filter_map(|t| t.hit(origin, dir))
                .fold(cfg.range, f64::min);
            d / cfg.range
        })
        .collect();
    if cfg.noise_std > 0.0 {
        if let Some(rng) = rng {
            let normal = Normal::new(0.0, cfg.noise_std).expect("finite noise std");
            for v in &mut out {
                *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
            }
        }
    }
    out
}
