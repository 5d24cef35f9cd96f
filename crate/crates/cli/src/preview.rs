//! Top-down SVG rendering of a scene map, optionally with a driven path.

use std::fmt::Write;

use pvp_sim::{BoundaryKind, SceneMap, Vec2};

const MARGIN: f64 = 10.0;

struct Bounds {
    min: Vec2,
    max: Vec2,
}

impl Bounds {
    fn of(points: impl Iterator<Item = Vec2>) -> Self {
        let mut b = Bounds {
            min: Vec2::new(f64::INFINITY, f64::INFINITY),
            max: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        };
        for p in points {
            b.min = Vec2::new(b.min.x.min(p.x), b.min.y.min(p.y));
            b.max = Vec2::new(b.max.x.max(p.x), b.max.y.max(p.y));
        }
        if !b.min.x.is_finite() {
            b.min = Vec2::ZERO;
            b.max = Vec2::ZERO;
        }
        b
    }

    /// World to image coordinates; the image y axis points down.
    fn map(&self, p: Vec2) -> (f64, f64) {
        (p.x - self.min.x + MARGIN, self.max.y - p.y + MARGIN)
    }
}

fn points_attr(b: &Bounds, pts: &[Vec2]) -> String {
    pts.iter()
        .map(|&p| {
            let (x, y) = b.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_svg(map: &SceneMap, path: Option<&[Vec2]>) -> String {
    let strips: Vec<Vec<Vec2>> = map
        .lanes()
        .iter()
        .map(|lane| {
            let mut poly = lane.offset_polyline(lane.width / 2.0);
            let mut right = lane.offset_polyline(-lane.width / 2.0);
            right.reverse();
            poly.extend(right);
            poly
        })
        .collect();
    let b = Bounds::of(strips.iter().flatten().copied().chain(path.unwrap_or(&[]).iter().copied()));
    let (w, h) = (b.max.x - b.min.x + 2.0 * MARGIN, b.max.y - b.min.y + 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.1} {h:.1}" width="{w:.0}" height="{h:.0}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#2d5a27"/>"##);
    for strip in &strips {
        let _ = writeln!(out, r##"<polygon points="{}" fill="#505050"/>"##, points_attr(&b, strip));
    }
    for seg in map.boundaries() {
        let (x1, y1) = b.map(seg.a);
        let (x2, y2) = b.map(seg.b);
        let style = match seg.kind {
            BoundaryKind::YellowSolid => r##"stroke="#f2c200" stroke-width="0.4""##,
            BoundaryKind::WhiteBroken => r##"stroke="#ffffff" stroke-width="0.25" stroke-dasharray="3 3""##,
            BoundaryKind::None => r##"stroke="#b0b0b0" stroke-width="0.5""##,
        };
        let _ = writeln!(out, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" {style}/>"#);
    }
    for o in map.obstacles() {
        let (x, y) = b.map(o.position());
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="#d04020"/>"##, o.radius);
    }
    for s in map.spawns() {
        let (x, y) = b.map(s.position());
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="#40c040"/>"##);
    }
    let (x, y) = b.map(map.destination().position());
    let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="#3070ff"/>"##);
    if let Some(path) = path.filter(|p| !p.is_empty()) {
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#ff8c00" stroke-width="0.6"/>"##,
            points_attr(&b, path)
        );
    }
    out.push_str("</svg>\n");
    out
}
