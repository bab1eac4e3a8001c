//! Iris position and gaze normal from a fitted ellipse.
//!
//! # Frames
//!
//! The synthetic renderer and servo simulator work in the usual pinhole
//! camera frame (x right, y down, z forward). Estimates are reported in the
//! *gaze frame*, which is the camera frame with x negated; this is the frame
//! in which `Ir_x = -Ir_z (p_x - pr_x) / f_x` holds with its printed sign.
//! [`to_gaze_frame`] converts between the two (it is its own inverse).
//!
//! Reported normals point from the eye toward the camera (negative z).

use std::f64::consts::PI;

use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::ellipse::Ellipse;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    /// Principal point, pixels.
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }

    /// Square-pixel intrinsics with the principal point at the image centre.
    pub fn centered(focal: f64, width: usize, height: usize) -> Self {
        Self::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
        )
    }

    pub fn fz(&self) -> f64 {
        (self.fx + self.fy) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.fx > 0.0 && self.fy > 0.0 && self.cx.is_finite() && self.cy.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid intrinsics {self:?}"
            )))
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Pinhole projection of a camera-frame point.
    pub fn project(&self, p: &Vector3<f64>) -> Point2<f64> {
        Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Camera-frame ray (z = 1) through pixel `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrisModel {
    /// Physical iris radius, millimetres.
    pub radius_mm: f64,
}

impl Default for IrisModel {
    fn default() -> Self {
        Self { radius_mm: 5.9 }
    }
}

/// Camera frame <-> gaze frame (negates x).
pub fn to_gaze_frame(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-v.x, v.y, v.z)
}

/// Rotation axis used by the off-centre correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CorrectionAxis {
    /// `[Ir_y/d, Ir_x/d, 0]` as printed. Kept for comparison; it is not
    /// perpendicular to the line of sight in general and fails the
    /// projection round trip.
    Printed,
    /// `ẑ × u` with `u` the unit line-of-sight direction: the axis that
    /// carries the optical axis onto the line of sight.
    #[default]
    ZCrossU,
}

/// Iris centre in the gaze frame, millimetres.
///
/// Depth uses the semi-major axis: an iris of radius `R` at depth `Z`
/// images with semi-major axis `f R / Z`.
pub fn unproject_iris(e: &Ellipse, cam: &CameraIntrinsics, iris: &IrisModel) -> Vector3<f64> {
    let z = cam.fz() * iris.radius_mm / e.semi_major();
    let x = -z * (e.cx - cam.cx) / cam.fx;
    let y = z * (e.cy - cam.cy) / cam.fy;
    Vector3::new(x, y, z)
}

/// Tilt of the iris plane from the image plane, `acos(minor / major)`.
pub fn tilt_angle(e: &Ellipse) -> f64 {
    (e.minor / e.major).clamp(0.0, 1.0).acos()
}

/// Direction of the tilt (the projected minor axis) expressed in gaze-frame
/// x/y, reduced to `[0, π)`. This is the azimuth [`candidate_normals`] expects.
pub fn tilt_azimuth(e: &Ellipse) -> f64 {
    (PI / 2.0 - e.psi).rem_euclid(PI)
}

/// The two mirror reconstructions of a circle seen as an ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateNormals {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Candidate {
    A,
    B,
}

impl CandidateNormals {
    pub fn get(&self, which: Candidate) -> Vector3<f64> {
        match which {
            Candidate::A => self.a,
            Candidate::B => self.b,
        }
    }

    /// Both candidates negated, so that they point toward the camera.
    pub fn toward_camera(&self) -> Self {
        Self {
            a: -self.a,
            b: -self.b,
        }
    }
}

/// Normal from tilt and azimuth, and its mirror solution.
pub fn candidate_normals(theta: f64, psi: f64) -> CandidateNormals {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    CandidateNormals {
        a: Vector3::new(-st * cp, -st * sp, ct),
        b: Vector3::new(st * cp, st * sp, ct),
    }
}

/// Rotation axis for a given iris position, or `None` on the optical axis.
pub fn correction_axis(position: &Vector3<f64>, kind: CorrectionAxis) -> Option<Vector3<f64>> {
    let d = position.x.hypot(position.y);
    if d < 1e-9 {
        return None;
    }
    Some(match kind {
        CorrectionAxis::Printed => Vector3::new(position.y / d, position.x / d, 0.0),
        CorrectionAxis::ZCrossU => Vector3::new(-position.y / d, position.x / d, 0.0),
    })
}

/// Correction angle `γ = atan(d / Ir_z)`.
pub fn correction_angle(position: &Vector3<f64>) -> f64 {
    position.x.hypot(position.y).atan2(position.z)
}

/// Rodrigues rotation: `n cos γ + (l × n) sin γ + l (l·n)(1 - cos γ)`.
pub fn rodrigues(n: &Vector3<f64>, axis: &Vector3<f64>, gamma: f64) -> Vector3<f64> {
    let (s, c) = gamma.sin_cos();
    n * c + axis.cross(n) * s + axis * axis.dot(n) * (1.0 - c)
}

/// Rotates a normal estimated about the optical axis onto the
/// line of sight through `position`. Identity for on-axis positions.
pub fn off_center_correction(
    n: &Vector3<f64>,
    position: &Vector3<f64>,
    kind: CorrectionAxis,
) -> Vector3<f64> {
    match correction_axis(position, kind) {
        Some(axis) => rodrigues(n, &axis, correction_angle(position)),
        None => *n,
    }
}

/// How the mirror ambiguity was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disambiguation {
    /// Iris/sclera displacement picked the candidate.
    Geometric,
    /// Displacement too small; the previous frame's choice was carried over.
    Carried,
    /// No usable evidence; candidate A returned.
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeConfig {
    pub axis: CorrectionAxis,
    /// Minimum iris/sclera centre displacement for the geometric rule, pixels.
    pub ambiguity_eps_px: f64,
    /// Consecutive frames a previous choice may be carried.
    pub max_carried_frames: u32,
}

impl Default for GazeConfig {
    fn default() -> Self {
        Self {
            axis: CorrectionAxis::ZCrossU,
            ambiguity_eps_px: 3.0,
            max_carried_frames: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeEstimate {
    /// Iris centre, gaze frame, millimetres.
    pub position: Vector3<f64>,
    /// Unit gaze normal after disambiguation and correction, gaze frame.
    pub normal: Vector3<f64>,
    /// Selected candidate before the off-centre correction.
    pub raw_normal: Vector3<f64>,
    pub theta: f64,
    /// Major-axis angle of the source ellipse.
    pub psi: f64,
    pub gamma: f64,
    pub disambiguation: Disambiguation,
    /// Frames since the last geometric decision (0 when geometric).
    pub carried_frames: u32,
}

impl GazeEstimate {
    pub fn ambiguity_resolved(&self) -> bool {
        self.disambiguation == Disambiguation::Geometric
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub pick: Candidate,
    pub normal: Vector3<f64>,
    pub how: Disambiguation,
    pub carried_frames: u32,
}

/// Image-plane direction (x right, y down) of a gaze-frame vector.
fn image_direction(n: &Vector3<f64>) -> (f64, f64) {
    (-n.x, n.y)
}

/// Picks the candidate whose image-plane direction agrees with the
/// iris-minus-sclera displacement. Candidates must point toward the camera.
pub fn resolve_ambiguity(
    candidates: &CandidateNormals,
    iris_center_px: &Point2<f64>,
    sclera_center_px: &Point2<f64>,
    prev: Option<&GazeEstimate>,
    cfg: &GazeConfig,
) -> Resolution {
    let delta = iris_center_px - sclera_center_px;
    if delta.norm() >= cfg.ambiguity_eps_px {
        let (ax, ay) = image_direction(&candidates.a);
        let pick = if ax * delta.x + ay * delta.y >= 0.0 {
            Candidate::A
        } else {
            Candidate::B
        };
        return Resolution {
            pick,
            normal: candidates.get(pick),
            how: Disambiguation::Geometric,
            carried_frames: 0,
        };
    }
    if let Some(prev) = prev {
        let can_carry = match prev.disambiguation {
            Disambiguation::Geometric => true,
            Disambiguation::Carried => prev.carried_frames < cfg.max_carried_frames,
            Disambiguation::Default => false,
        };
        if can_carry {
            let pick = if candidates.a.dot(&prev.raw_normal) >= candidates.b.dot(&prev.raw_normal) {
                Candidate::A
            } else {
                Candidate::B
            };
            return Resolution {
                pick,
                normal: candidates.get(pick),
                how: Disambiguation::Carried,
                carried_frames: prev.carried_frames + 1,
            };
        }
    }
    Resolution {
        pick: Candidate::A,
        normal: candidates.a,
        how: Disambiguation::Default,
        carried_frames: 0,
    }
}

/// Full chain: unprojection, tilt, candidates, disambiguation, correction.
pub fn estimate_gaze(
    iris_ellipse: &Ellipse,
    sclera_center_px: &Point2<f64>,
    cam: &CameraIntrinsics,
    iris: &IrisModel,
    prev: Option<&GazeEstimate>,
    cfg: &GazeConfig,
) -> Result<GazeEstimate> {
    cam.validate()?;
    if !iris_ellipse.is_valid() {
        return Err(Error::InvalidParameter(format!(
            "invalid ellipse {iris_ellipse:?}"
        )));
    }
    if !(iris.radius_mm > 0.0) {
        return Err(Error::InvalidParameter(
            "iris radius must be positive".into(),
        ));
    }
    let position = unproject_iris(iris_ellipse, cam, iris);
    let theta = tilt_angle(iris_ellipse);
    let candidates = candidate_normals(theta, tilt_azimuth(iris_ellipse)).toward_camera();
    let res = resolve_ambiguity(
        &candidates,
        &iris_ellipse.center(),
        sclera_center_px,
        prev,
        cfg,
    );
    let corrected = off_center_correction(&res.normal, &position, cfg.axis);
    Ok(GazeEstimate {
        position,
        normal: corrected.normalize(),
        raw_normal: res.normal,
        theta,
        psi: iris_ellipse.psi,
        gamma: correction_angle(&position),
        disambiguation: res.how,
        carried_frames: res.carried_frames,
    })
}

/// Angle between two vectors, radians.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    // atan2 form stays accurate for nearly parallel vectors.
    a.cross(b).norm().atan2(a.dot(b))
}
