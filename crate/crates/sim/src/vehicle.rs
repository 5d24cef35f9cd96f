//! Vehicle state and the kinematic bicycle model used for the ego car.

use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, OrientedBox, Pose, Vec2};

pub const WHEELBASE: f64 = 2.5;
pub const MAX_STEER: f64 = 40.0 * std::f64::consts::PI / 180.0;
/// Acceleration at `accel = +1` (m/s²).
pub const MAX_ACCEL: f64 = 3.0;
/// Deceleration at `accel = −1` (m/s²).
pub const MAX_BRAKE: f64 = 5.0;
pub const VEHICLE_LENGTH: f64 = 4.5;
pub const VEHICLE_WIDTH: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Ego,
    Traffic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    /// Last normalized steering command; positive turns right.
    pub steer: f64,
    pub kind: VehicleKind,
    pub alive: bool,
}

impl VehicleState {
    pub fn new(pose: Pose, speed: f64, kind: VehicleKind) -> Self {
        VehicleState {
            position: pose.position(),
            heading: normalize_angle(pose.heading),
            speed,
            steer: 0.0,
            kind,
            alive: true,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position.x, self.position.y, self.heading)
    }

    pub fn footprint(&self) -> OrientedBox {
        OrientedBox {
            center: self.position,
            heading: self.heading,
            length: VEHICLE_LENGTH,
            width: VEHICLE_WIDTH,
        }
    }

    /// Maps a normalized longitudinal command to m/s².
    pub fn accel_from_command(accel: f64) -> f64 {
        let a = accel.clamp(-1.0, 1.0);
        if a >= 0.0 {
            a * MAX_ACCEL
        } else {
            a * MAX_BRAKE
        }
    }

    /// One physics sub-step. Speed is updated first and then drives the
    /// position and yaw update, so a stopped car with zero command stays put.
    pub fn bicycle_step(&mut self, steer: f64, accel: f64, dt: f64, v_max: f64) {
        let steer = steer.clamp(-1.0, 1.0);
        self.steer = steer;
        self.speed = (self.speed + Self::accel_from_command(accel) * dt).clamp(0.0, v_max);
        let delta = -steer * MAX_STEER;
        let yaw_rate = self.speed / WHEELBASE * delta.tan();
        let mid = self.heading + 0.5 * yaw_rate * dt;
        self.position = self.position + Vec2::from_angle(mid) * (self.speed * dt);
        self.heading = normalize_angle(self.heading + yaw_rate * dt);
    }
}
