//! Kinematic stand-in for a camera on a robot arm that keeps facing the
//! iris at a fixed standoff.

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::angle_between;
use crate::synth::plane_basis;

pub const DEFAULT_STANDOFF_MM: f64 = 209.0;

/// Per-pose normal errors, degrees, for poses -30..=30 in 5 degree steps
/// (hardware measurements used to size the simulated estimator noise).
pub const TABLE_NOISE_DEG: [f64; 13] = [
    0.968, 0.514, 0.303, 0.418, 0.572, 0.659, 0.517, 0.406, 0.451, 0.188, 0.351, 1.010, 1.241,
];

/// Interpolated noise magnitude for a pose angle, clamped to the table's range.
pub fn table_noise_deg(angle_deg: f64) -> f64 {
    let t = ((angle_deg + 30.0) / 5.0).clamp(0.0, 12.0);
    let i = (t.floor() as usize).min(11);
    let f = t - i as f64;
    TABLE_NOISE_DEG[i] * (1.0 - f) + TABLE_NOISE_DEG[i + 1] * f
}

/// World-frame pose target for the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoTarget {
    pub position: Vector3<f64>,
    /// Unit optical axis.
    pub axis: Vector3<f64>,
}

/// Camera in front of the iris along its normal, looking back at it.
/// `normal` must point from the eye toward the camera side.
pub fn servo_target(
    iris_position: &Vector3<f64>,
    normal: &Vector3<f64>,
    standoff: f64,
) -> ServoTarget {
    let n = normal.normalize();
    ServoTarget {
        position: iris_position + n * standoff,
        axis: -n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoState {
    pub position: Vector3<f64>,
    pub axis: Vector3<f64>,
    pub standoff: f64,
    /// Translation limit per tick, mm (infinite for unconstrained).
    pub max_step_mm: f64,
    /// Rotation limit per tick, radians.
    pub max_step_rad: f64,
}

impl ServoState {
    pub fn validate(&self) -> Result<()> {
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "camera axis must be unit length".into(),
            ));
        }
        if !(self.standoff > 0.0 && self.max_step_mm > 0.0 && self.max_step_rad > 0.0) {
            return Err(Error::InvalidParameter(
                "standoff and step limits must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn reached(&self, target: &ServoTarget) -> bool {
        self.position == target.position && self.axis == target.axis
    }
}

/// One rate-limited tick: straight-line translation and geodesic rotation.
pub fn step_servo(state: &ServoState, target: &ServoTarget) -> ServoState {
    let delta = target.position - state.position;
    let dist = delta.norm();
    let position = if dist <= state.max_step_mm {
        target.position
    } else {
        state.position + delta * (state.max_step_mm / dist)
    };

    let angle = angle_between(&state.axis, &target.axis);
    let axis = if angle <= state.max_step_rad {
        target.axis
    } else {
        let pivot = state.axis.cross(&target.axis);
        let pivot = if pivot.norm() > 1e-12 {
            pivot
        } else {
            // Antiparallel: any perpendicular works.
            plane_basis(&state.axis).0
        };
        (Rotation3::from_axis_angle(&Unit::new_normalize(pivot), state.max_step_rad) * state.axis)
            .normalize()
    };
    ServoState {
        position,
        axis,
        ..*state
    }
}

/// Where the servo's gaze estimates come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    /// Exact iris position and normal.
    Truth,
    /// Exact position; normal tilted by the tabulated error for the pose in a
    /// seeded random direction, redrawn every tick.
    Noisy { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoExperiment {
    /// Eye rotation angles at which the camera pose is recorded, degrees.
    pub poses_deg: Vec<f64>,
    /// Eye rotation axis, world frame.
    pub rotation_axis: Vector3<f64>,
    pub eye_center: Vector3<f64>,
    pub eye_radius: f64,
    pub iris_radius: f64,
    pub standoff: f64,
    pub max_step_mm: f64,
    pub max_step_deg: f64,
    pub ticks_per_pose: usize,
    pub source: EstimateSource,
}

impl Default for ServoExperiment {
    fn default() -> Self {
        Self {
            poses_deg: (-3..=3).map(|i| i as f64 * 10.0).collect(),
            rotation_axis: Vector3::y(),
            eye_center: Vector3::zeros(),
            eye_radius: 12.0,
            iris_radius: 5.9,
            standoff: DEFAULT_STANDOFF_MM,
            max_step_mm: 20.0,
            max_step_deg: 10.0,
            ticks_per_pose: 50,
            source: EstimateSource::Truth,
        }
    }
}

impl ServoExperiment {
    /// Straight-ahead gaze is world +z.
    pub fn normal_at(&self, angle_deg: f64) -> Vector3<f64> {
        let rot = Rotation3::from_axis_angle(
            &Unit::new_normalize(self.rotation_axis),
            angle_deg.to_radians(),
        );
        rot * Vector3::z()
    }

    pub fn iris_at(&self, angle_deg: f64) -> Vector3<f64> {
        let depth = (self.eye_radius.powi(2) - self.iris_radius.powi(2)).sqrt();
        self.eye_center + self.normal_at(angle_deg) * depth
    }

    pub fn validate(&self) -> Result<()> {
        if self.poses_deg.is_empty() {
            return Err(Error::InvalidParameter("no servo poses".into()));
        }
        if self.ticks_per_pose == 0 {
            return Err(Error::InvalidParameter(
                "ticks per pose must be at least 1".into(),
            ));
        }
        if !(self.iris_radius > 0.0 && self.iris_radius < self.eye_radius) {
            return Err(Error::InvalidParameter(
                "iris radius must be inside the eye".into(),
            ));
        }
        if self.rotation_axis.norm() == 0.0 {
            return Err(Error::InvalidParameter("rotation axis is zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoRow {
    pub angle_deg: f64,
    pub distance_mm: f64,
    pub angle_error_deg: f64,
    /// Ticks until the rate limits stopped binding (`None` if never).
    pub settle_ticks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoReport {
    pub standoff: f64,
    pub rows: Vec<ServoRow>,
    pub mean_distance_mm: f64,
    pub mean_distance_error_mm: f64,
    pub mean_angle_error_deg: f64,
}

impl ServoReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle_deg,distance_mm,angle_error_deg,settle_ticks\n");
        for r in &self.rows {
            let ticks = r.settle_ticks.map(|t| t.to_string()).unwrap_or_default();
            out += &format!(
                "{},{:.6},{:.6},{}\n",
                r.angle_deg, r.distance_mm, r.angle_error_deg, ticks
            );
        }
        out += &format!(
            "mean,{:.6},{:.6},\nmean_abs_distance_error,{:.6},,\n",
            self.mean_distance_mm, self.mean_angle_error_deg, self.mean_distance_error_mm
        );
        out
    }
}

fn perturb(normal: &Vector3<f64>, magnitude_rad: f64, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let (u, v) = plane_basis(normal);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let pivot = u * phi.cos() + v * phi.sin();
    Rotation3::from_axis_angle(&Unit::new_normalize(pivot), magnitude_rad) * normal
}

/// Steps the eye through each pose, servoing the camera for a fixed number
/// of ticks, and records the final camera pose against the truth.
pub fn run_servo_experiment(exp: &ServoExperiment) -> Result<ServoReport> {
    exp.validate()?;
    let mut state = ServoState {
        position: exp.iris_at(0.0) + exp.normal_at(0.0) * exp.standoff,
        axis: -exp.normal_at(0.0),
        standoff: exp.standoff,
        max_step_mm: exp.max_step_mm,
        max_step_rad: exp.max_step_deg.to_radians(),
    };
    state.validate()?;
    let mut rng = match exp.source {
        EstimateSource::Noisy { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        EstimateSource::Truth => None,
    };

    let mut rows = Vec::with_capacity(exp.poses_deg.len());
    for &angle in &exp.poses_deg {
        let iris = exp.iris_at(angle);
        let normal = exp.normal_at(angle);
        let mut settle_ticks = None;
        for tick in 0..exp.ticks_per_pose {
            let est_normal = match rng.as_mut() {
                Some(rng) => perturb(&normal, table_noise_deg(angle).to_radians(), rng),
                None => normal,
            };
            let target = servo_target(&iris, &est_normal, exp.standoff);
            state = step_servo(&state, &target);
            if settle_ticks.is_none() && state.reached(&target) {
                settle_ticks = Some(tick + 1);
            }
        }
        rows.push(ServoRow {
            angle_deg: angle,
            distance_mm: (state.position - iris).norm(),
            angle_error_deg: angle_between(&state.axis, &(-normal)).to_degrees(),
            settle_ticks,
        });
    }
    let n = rows.len() as f64;
    Ok(ServoReport {
        standoff: exp.standoff,
        mean_distance_mm: rows.iter().map(|r| r.distance_mm).sum::<f64>() / n,
        mean_distance_error_mm: rows
            .iter()
            .map(|r| (r.distance_mm - exp.standoff).abs())
            .sum::<f64>()
            / n,
        mean_angle_error_deg: rows.iter().map(|r| r.angle_error_deg).sum::<f64>() / n,
        rows,
    })
}
