//! Deterministic 2D driving simulator: procedural road maps, lanes with
//! Frenet frames, lidar, IDM traffic and a kinematic-bicycle ego car.

pub mod env;
pub mod geom;
pub mod idm;
pub mod lane;
pub mod lidar;
pub mod map;
pub mod pg;
pub mod scenes;
pub mod trajectory;
pub mod vehicle;

pub use env::{
    compute_reward, DriveEnv, EnvConfig, EnvError, EventFlags, Observation, RewardInput, StepOutcome, Termination,
    TrafficVehicle,
};
pub use geom::{normalize_angle, OrientedBox, Pose, Vec2};
pub use idm::{idm_acceleration, IdmOutput, IdmParams, Leader};
pub use lane::{BoundaryKind, Frenet, Lane};
pub use lidar::{lidar_scan, LidarConfig, LidarTarget};
pub use map::{load_map, MapError, MapFile, Obstacle, ObstacleKind, SceneMap};
pub use pg::{pg_generate, pg_generate_with, BlockSpec, GenerationError, PgConfig};
pub use scenes::{SceneCatalog, SceneConfig, SceneError, Split};
pub use trajectory::{read_trajectory, TrajectoryRecord, TrajectoryWriter};
pub use vehicle::{VehicleKind, VehicleState};
