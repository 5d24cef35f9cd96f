#![allow(dead_code)]

use std::sync::Arc;

use pvp_sim::lane::BoundaryKind;
use pvp_sim::map::{LaneRecord, MapFile, MAP_FORMAT};
use pvp_sim::{Pose, SceneMap};

/// Two parallel 200 m lanes along +x: lane 0 on y = 0 under the yellow line
/// at y = 1.75, lane 1 on y = −3.5 next to the curb at y = −5.25.
pub fn straight_road() -> Arc<SceneMap> {
    let raw = MapFile {
        format: MAP_FORMAT.to_string(),
        seed: 11,
        blocks: vec![],
        lanes: vec![
            LaneRecord {
                id: 0,
                width: 3.5,
                boundary_left: BoundaryKind::YellowSolid,
                boundary_right: BoundaryKind::WhiteBroken,
                points: vec![[0.0, 0.0], [200.0, 0.0]],
            },
            LaneRecord {
                id: 1,
                width: 3.5,
                boundary_left: BoundaryKind::WhiteBroken,
                boundary_right: BoundaryKind::None,
                points: vec![[0.0, -3.5], [200.0, -3.5]],
            },
        ],
        edges: vec![[0, 1], [1, 0]],
        spawns: vec![Pose::new(5.0, 0.0, 0.0)],
        destination: Pose::new(195.0, 0.0, 0.0),
        obstacles: vec![],
    };
    Arc::new(SceneMap::from_file(raw).unwrap())
}
