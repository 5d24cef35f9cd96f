//! Lane fragments: polyline centerlines with an invertible Frenet frame.
//!
//! Each vertex carries a miter vector (the angle bisector of the adjacent
//! segment normals, scaled so that its component along either normal is 1).
//! A point at lateral offset `d` from segment `i` at fraction `t` is
//! `P_i + t·e_i + d·((1 − t)·m_i + t·m_{i+1})`, so offset curves are exact
//! parallels of every segment and the projection is the exact inverse of the
//! embedding for `|d|` below the local turning radius.

use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    YellowSolid,
    WhiteBroken,
    /// Unpainted road edge with a curb and sidewalk beyond it.
    None,
}

impl BoundaryKind {
    /// Whether the boundary is a physical or rule edge of the drivable area.
    pub fn is_outer(self) -> bool {
        !matches!(self, BoundaryKind::WhiteBroken)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frenet {
    pub s: f64,
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct Lane {
    pub id: u32,
    pub width: f64,
    pub boundary_left: BoundaryKind,
    pub boundary_right: BoundaryKind,
    points: Vec<Vec2>,
    cum: Vec<f64>,
    dirs: Vec<Vec2>,
    miters: Vec<Vec2>,
    bbox_min: Vec2,
    bbox_max: Vec2,
}

impl PartialEq for Lane {
    fn eq(&self, o: &Lane) -> bool {
        self.id == o.id
            && self.width == o.width
            && self.boundary_left == o.boundary_left
            && self.boundary_right == o.boundary_right
            && self.points == o.points
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LaneError {
    #[error("lane {0}: polyline needs at least 2 points")]
    TooFewPoints(u32),
    #[error("lane {0}: consecutive points {1} and {2} coincide")]
    DuplicatePoint(u32, usize, usize),
    #[error("lane {0}: width must be positive")]
    BadWidth(u32),
}

impl Lane {
    pub fn new(
        id: u32,
        width: f64,
        boundary_left: BoundaryKind,
        boundary_right: BoundaryKind,
        points: Vec<Vec2>,
    ) -> Result<Self, LaneError> {
        if points.len() < 2 {
            return Err(LaneError::TooFewPoints(id));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(LaneError::BadWidth(id));
        }
        let mut cum = Vec::with_capacity(points.len());
        let mut dirs = Vec::with_capacity(points.len() - 1);
        cum.push(0.0);
        for (i, w) in points.windows(2).enumerate() {
            let e = w[1] - w[0];
            let len = e.norm();
            if len < 1e-9 {
                return Err(LaneError::DuplicatePoint(id, i, i + 1));
            }
            dirs.push(e * (1.0 / len));
            cum.push(cum[i] + len);
        }
        let mut miters = Vec::with_capacity(points.len());
        miters.push(dirs[0].perp());
        for i in 1..points.len() - 1 {
            let n0 = dirs[i - 1].perp();
            let n1 = dirs[i].perp();
            let bis = n0 + n1;
            let m = if bis.norm() < 1e-9 {
                n1
            } else {
                let b = bis.normalized();
                b * (1.0 / b.dot(n1))
            };
            miters.push(m);
        }
        miters.push(dirs[dirs.len() - 1].perp());
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in &points {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        Ok(Lane {
            id,
            width,
            boundary_left,
            boundary_right,
            points,
            cum,
            dirs,
            miters,
            bbox_min: lo,
            bbox_max: hi,
        })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn start(&self) -> Vec2 {
        self.points[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.points.last().unwrap()
    }

    /// Whether `p` lies within `margin` of the centerline's bounding box.
    pub fn near_bbox(&self, p: Vec2, margin: f64) -> bool {
        p.x >= self.bbox_min.x - margin
            && p.x <= self.bbox_max.x + margin
            && p.y >= self.bbox_min.y - margin
            && p.y <= self.bbox_max.y + margin
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.dirs.len();
        match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    /// Direction of travel at arclength `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        self.dirs[self.segment_at(s)].angle()
    }

    /// Frenet coordinates of `p` relative to this lane (left is positive `d`).
    pub fn project(&self, p: Vec2) -> Frenet {
        self.project_segments(p, 0, self.dirs.len())
            .unwrap_or_else(|| self.project_nearest(p))
    }

    /// Projection restricted to segments overlapping `[s_lo, s_hi]`, so a
    /// tracked point cannot jump to a distant part of a looping centerline.
    pub fn project_window(&self, p: Vec2, s_lo: f64, s_hi: f64) -> Frenet {
        let i0 = self.segment_at(s_lo.max(0.0));
        let i1 = self.segment_at(s_hi.min(self.length())) + 1;
        self.project_segments(p, i0, i1)
            .unwrap_or_else(|| self.project(p))
    }

    fn project_segments(&self, p: Vec2, first: usize, last: usize) -> Option<Frenet> {
        let nseg = self.dirs.len();
        let mut best: Option<Frenet> = None;
        for i in first..last {
            let a = self.points[i];
            let e = self.points[i + 1] - a;
            let m0 = self.miters[i];
            let dm = self.miters[i + 1] - m0;
            let q = p - a;
            let c2 = -e.cross(dm);
            let c1 = q.cross(dm) - e.cross(m0);
            let c0 = q.cross(m0);
            let lo = if i == 0 { f64::NEG_INFINITY } else { -1e-12 };
            let hi = if i + 1 == nseg { f64::INFINITY } else { 1.0 + 1e-12 };
            let mut consider = |t: f64| {
                if !(t >= lo && t <= hi) {
                    return;
                }
                let m = m0 + dm * t;
                let d = (q - e * t).dot(m) / m.norm_sq();
                let len = self.cum[i + 1] - self.cum[i];
                let cand = Frenet { s: self.cum[i] + t * len, d };
                if best.is_none_or(|b| d.abs() < b.d.abs()) {
                    best = Some(cand);
                }
            };
            if c2.abs() < 1e-14 * e.norm_sq().max(1.0) {
                if c1.abs() > 1e-300 {
                    consider(-c0 / c1);
                }
            } else {
                let disc = c1 * c1 - 4.0 * c2 * c0;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    // numerically stable pair of roots
                    let qv = -0.5 * (c1 + c1.signum() * sq);
                    if qv != 0.0 {
                        consider(qv / c2);
                        consider(c0 / qv);
                    } else {
                        consider(0.0);
                    }
                }
            }
        }
        best
    }

    /// Plain closest-point projection, used only when no mitered region applies.
    fn project_nearest(&self, p: Vec2) -> Frenet {
        let mut best = (f64::INFINITY, Frenet { s: 0.0, d: 0.0 });
        for i in 0..self.dirs.len() {
            let a = self.points[i];
            let len = self.cum[i + 1] - self.cum[i];
            let t = (p - a).dot(self.dirs[i]).clamp(0.0, len);
            let foot = a + self.dirs[i] * t;
            let dist = p.dist(foot);
            if dist < best.0 {
                let side = self.dirs[i].cross(p - foot).signum();
                best = (dist, Frenet { s: self.cum[i] + t, d: side * dist });
            }
        }
        best.1
    }

    /// Inverse of [`Lane::project`].
    pub fn embed(&self, s: f64, d: f64) -> Vec2 {
        let i = self.segment_at(s);
        let a = self.points[i];
        let e = self.points[i + 1] - a;
        let len = self.cum[i + 1] - self.cum[i];
        let t = (s - self.cum[i]) / len;
        let m = self.miters[i] + (self.miters[i + 1] - self.miters[i]) * t;
        a + e * t + m * d
    }

    /// Whether `p` is inside the lane strip (`0 ≤ s ≤ L`, `|d| ≤ w/2`).
    pub fn contains(&self, p: Vec2) -> bool {
        if !self.near_bbox(p, self.width) {
            return false;
        }
        let f = self.project(p);
        f.s >= -1e-9 && f.s <= self.length() + 1e-9 && f.d.abs() <= self.width / 2.0
    }

    /// Polyline offset by `d` (exact parallels of every segment).
    pub fn offset_polyline(&self, d: f64) -> Vec<Vec2> {
        self.points.iter().zip(&self.miters).map(|(&p, &m)| p + m * d).collect()
    }

    /// Mean absolute curvature over `[s, s + span]`, from heading changes.
    pub fn curvature_ahead(&self, s: f64, span: f64) -> f64 {
        let s0 = s.clamp(0.0, self.length());
        let s1 = (s + span).clamp(0.0, self.length());
        if s1 - s0 < 1e-6 {
            return 0.0;
        }
        let (i0, i1) = (self.segment_at(s0), self.segment_at(s1));
        let mut turn = 0.0;
        for i in i0..i1 {
            turn += normalize_angle(self.dirs[i + 1].angle() - self.dirs[i].angle()).abs();
        }
        turn / (s1 - s0)
    }
}
