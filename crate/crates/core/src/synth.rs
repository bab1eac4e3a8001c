//! Ground-truth eye scenes, their exact projections, and a rasteriser.
//!
//! Everything here is expressed in the camera frame (x right, y down,
//! z forward, millimetres). The iris is a planar disc whose rim lies on the
//! eyeball sphere; its normal is the gaze direction pointing out of the eye.

use nalgebra::{Matrix3, Point2, Rotation3, Unit, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipse::{Conic, Ellipse};
use crate::error::{Error, Result};
use crate::geometry::{to_gaze_frame, CameraIntrinsics};
use crate::imgproc::{BinaryMask, GrayImage};

pub const SCLERA_ALBEDO: f64 = 0.9;
pub const IRIS_ALBEDO: f64 = 0.15;
pub const SKIN_ALBEDO: f64 = 0.6;
const SUPERSAMPLE: usize = 4;

/// Multiplicative brightness ramp across the frame: 1 at the lit edge,
/// `1 - strength` at the far edge along `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowRamp {
    pub direction: [f64; 2],
    pub strength: f64,
}

/// Specular highlight on the iris.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Glint {
    /// Position on the iris plane as a fraction of the iris radius.
    pub offset: [f64; 2],
    pub radius_px: f64,
    /// Brightness in `[0, 1]`.
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeScene {
    pub eye_center: Vector3<f64>,
    pub eye_radius: f64,
    pub iris_radius: f64,
    /// Unit vector out of the eye through the iris centre.
    pub gaze_normal: Vector3<f64>,
    /// Fraction of light that is non-directional.
    pub ambient: f64,
    /// Global gain on all surfaces except glints.
    pub exposure: f64,
    pub shadow: Option<ShadowRamp>,
    pub glints: Vec<Glint>,
}

impl Default for EyeScene {
    fn default() -> Self {
        Self {
            eye_center: Vector3::new(0.0, 0.0, 160.0),
            eye_radius: 12.0,
            iris_radius: 5.9,
            gaze_normal: Vector3::new(0.0, 0.0, -1.0),
            ambient: 0.3,
            exposure: 1.0,
            shadow: None,
            glints: Vec::new(),
        }
    }
}

impl EyeScene {
    pub fn validate(&self) -> Result<()> {
        if (self.gaze_normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "gaze normal must be unit length".into(),
            ));
        }
        if !(self.iris_radius > 0.0 && self.iris_radius < self.eye_radius) {
            return Err(Error::InvalidParameter(
                "iris radius must be positive and smaller than the eye radius".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.ambient) || !(self.exposure > 0.0) {
            return Err(Error::InvalidParameter("lighting out of range".into()));
        }
        if let Some(ramp) = &self.shadow {
            if !(0.0..=1.0).contains(&ramp.strength)
                || ramp.direction[0].hypot(ramp.direction[1]) == 0.0
            {
                return Err(Error::InvalidParameter("invalid shadow ramp".into()));
            }
        }
        if self.eye_center.z <= 0.0 {
            return Err(Error::OutOfView("eye centre is behind the camera".into()));
        }
        Ok(())
    }

    /// Distance from eye centre to the iris plane.
    pub fn iris_depth(&self) -> f64 {
        (self.eye_radius.powi(2) - self.iris_radius.powi(2)).sqrt()
    }

    pub fn iris_center(&self) -> Vector3<f64> {
        self.eye_center + self.gaze_normal * self.iris_depth()
    }

    /// Copy with the gaze rotated about `axis` (through the eye centre).
    pub fn rotated(&self, axis: &Vector3<f64>, angle_rad: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle_rad);
        Self {
            gaze_normal: (rot * self.gaze_normal).normalize(),
            ..self.clone()
        }
    }

    /// Orthonormal `(u, v)` spanning the iris plane.
    pub fn iris_basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        plane_basis(&self.gaze_normal)
    }
}

pub fn plane_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let seed = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = (seed - n * seed.dot(n)).normalize();
    (u, n.cross(&u))
}

/// Exact perspective image of the iris rim.
pub fn project_iris_ellipse(scene: &EyeScene, cam: &CameraIntrinsics) -> Result<Ellipse> {
    iris_conic(scene, cam)?.to_ellipse()
}

fn iris_conic(scene: &EyeScene, cam: &CameraIntrinsics) -> Result<Conic> {
    let c = scene.iris_center();
    let n = scene.gaze_normal;
    let r = scene.iris_radius;
    if c.dot(&n).abs() < 1e-9 * c.norm() {
        return Err(Error::DegenerateGeometry(
            "iris plane passes through the camera centre".into(),
        ));
    }
    let nearest = c.z - r * (1.0 - n.z * n.z).max(0.0).sqrt();
    if nearest <= 0.0 {
        return Err(Error::OutOfView(
            "iris is not entirely in front of the camera".into(),
        ));
    }
    let (u, v) = scene.iris_basis();
    let h = cam.matrix() * Matrix3::from_columns(&[u * r, v * r, c]);
    let h_inv = h
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("singular iris homography".into()))?;
    let unit_circle = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
    Ok(Conic::from_matrix(h_inv.transpose() * unit_circle * h_inv))
}

/// Occluding contour of the eyeball sphere.
pub fn project_eyeball_silhouette(scene: &EyeScene, cam: &CameraIntrinsics) -> Result<Ellipse> {
    let e = scene.eye_center;
    let k = e.norm_squared() - scene.eye_radius.powi(2);
    if k <= 0.0 || e.z <= scene.eye_radius {
        return Err(Error::OutOfView(
            "eyeball is not in front of the camera".into(),
        ));
    }
    let k_inv = cam
        .matrix()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular intrinsics".into()))?;
    let cone = e * e.transpose() - Matrix3::identity() * k;
    Conic::from_matrix(k_inv.transpose() * cone * k_inv).to_ellipse()
}

/// Ground truth carried alongside every rendered frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
    pub scene: EyeScene,
    pub iris_ellipse: Ellipse,
    pub eyeball_silhouette: Ellipse,
    /// Centre of the projected iris ellipse.
    pub iris_center_px: Point2<f64>,
    /// Projection of the 3-D iris centre (differs slightly from the ellipse centre).
    pub iris_center_projected_px: Point2<f64>,
    pub eye_center_px: Point2<f64>,
    pub iris_position_camera: Vector3<f64>,
    pub normal_camera: Vector3<f64>,
    pub iris_position_gaze: Vector3<f64>,
    /// Normal pointing toward the camera side, gaze frame.
    pub normal_gaze: Vector3<f64>,
}

impl FrameMeta {
    pub fn new(
        scene: &EyeScene,
        cam: &CameraIntrinsics,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        scene.validate()?;
        let iris_ellipse = project_iris_ellipse(scene, cam)?;
        let eyeball_silhouette = project_eyeball_silhouette(scene, cam)?;
        let ic = scene.iris_center();
        Ok(Self {
            width,
            height,
            intrinsics: *cam,
            scene: scene.clone(),
            iris_ellipse,
            eyeball_silhouette,
            iris_center_px: iris_ellipse.center(),
            iris_center_projected_px: cam.project(&ic),
            eye_center_px: cam.project(&scene.eye_center),
            iris_position_camera: ic,
            normal_camera: scene.gaze_normal,
            iris_position_gaze: to_gaze_frame(&ic),
            normal_gaze: to_gaze_frame(&scene.gaze_normal),
        })
    }

    /// Pixels whose centres lie inside the analytic iris ellipse.
    pub fn iris_mask(&self) -> BinaryMask {
        let e = &self.iris_ellipse;
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            e.contains(&Point2::new(x as f64, y as f64))
        })
    }
}

#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub image: GrayImage,
    pub meta: FrameMeta,
}

struct Rasterizer<'a> {
    scene: &'a EyeScene,
    cam: &'a CameraIntrinsics,
    iris_center: Vector3<f64>,
    iris_plane_d: f64,
    eye_k: f64,
    ramp: Option<(f64, f64, f64, f64, f64)>,
    glints: Vec<(Point2<f64>, f64, f64)>,
}

impl<'a> Rasterizer<'a> {
    fn new(scene: &'a EyeScene, cam: &'a CameraIntrinsics, width: usize, height: usize) -> Self {
        let iris_center = scene.iris_center();
        let ramp = scene.shadow.map(|r| {
            let len = r.direction[0].hypot(r.direction[1]);
            let (dx, dy) = (r.direction[0] / len, r.direction[1] / len);
            let corners = [
                (0.0, 0.0),
                (width as f64 - 1.0, 0.0),
                (0.0, height as f64 - 1.0),
                (width as f64 - 1.0, height as f64 - 1.0),
            ];
            let proj: Vec<f64> = corners.iter().map(|(x, y)| x * dx + y * dy).collect();
            let lo = proj.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (dx, dy, lo, (hi - lo).max(1e-12), r.strength)
        });
        let (u, v) = scene.iris_basis();
        let glints = scene
            .glints
            .iter()
            .map(|g| {
                let p = iris_center + (u * g.offset[0] + v * g.offset[1]) * scene.iris_radius;
                (cam.project(&p), g.radius_px, g.intensity)
            })
            .collect();
        Self {
            scene,
            cam,
            iris_center,
            iris_plane_d: iris_center.dot(&scene.gaze_normal),
            eye_k: scene.eye_center.norm_squared() - scene.eye_radius.powi(2),
            ramp,
            glints,
        }
    }

    fn ramp_factor(&self, x: f64, y: f64) -> f64 {
        match self.ramp {
            Some((dx, dy, lo, span, strength)) => {
                let t = ((x * dx + y * dy - lo) / span).clamp(0.0, 1.0);
                1.0 - strength * t
            }
            None => 1.0,
        }
    }

    fn lighting(&self, lambert: f64) -> f64 {
        let a = self.scene.ambient;
        self.scene.exposure * (a + (1.0 - a) * lambert.max(0.0))
    }

    /// Radiance in `[0, 1]`-ish units (before 8-bit scaling) at image point `(x, y)`.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let d = self.cam.ray(x, y);
        let dn = d.normalize();
        let n = &self.scene.gaze_normal;

        let denom = d.dot(n);
        if denom < 0.0 {
            let t = self.iris_plane_d / denom;
            if t > 0.0 && (d * t - self.iris_center).norm_squared() < self.scene.iris_radius.powi(2)
            {
                let q = Point2::new(x, y);
                for (c, r, intensity) in &self.glints {
                    if (q - c).norm_squared() < r * r {
                        return *intensity;
                    }
                }
                return IRIS_ALBEDO * self.lighting(-dn.dot(n)) * self.ramp_factor(x, y);
            }
        }
        let b = d.dot(&self.scene.eye_center);
        let disc = b * b - d.norm_squared() * self.eye_k;
        let base = if disc >= 0.0 && b > 0.0 {
            let t = (b - disc.sqrt()) / d.norm_squared();
            let normal = (d * t - self.scene.eye_center) / self.scene.eye_radius;
            SCLERA_ALBEDO * self.lighting(-dn.dot(&normal))
        } else {
            SKIN_ALBEDO * self.lighting(1.0)
        };
        base * self.ramp_factor(x, y)
    }
}

fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Rasterises a scene. Pixel centres sit at integer coordinates; pixels
/// around the iris are 4x4 supersampled.
pub fn render_frame(
    scene: &EyeScene,
    cam: &CameraIntrinsics,
    width: usize,
    height: usize,
) -> Result<RenderedFrame> {
    let meta = FrameMeta::new(scene, cam, width, height)?;
    let (x0, y0, x1, y1) = meta.eyeball_silhouette.bounding_box();
    if x0 < 0.0 || y0 < 0.0 || x1 > width as f64 - 1.0 || y1 > height as f64 - 1.0 {
        return Err(Error::OutOfView(
            "eyeball silhouette leaves the frame".into(),
        ));
    }
    let raster = Rasterizer::new(scene, cam, width, height);
    let (ix0, iy0, ix1, iy1) = meta.iris_ellipse.bounding_box();
    let in_ss = |x: usize, y: usize| {
        let (x, y) = (x as f64, y as f64);
        x >= ix0 - 2.0 && x <= ix1 + 2.0 && y >= iy0 - 2.0 && y <= iy1 + 2.0
    };
    let offsets: Vec<f64> = (0..SUPERSAMPLE)
        .map(|i| (i as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5)
        .collect();

    let mut data = vec![0u8; width * height];
    data.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, px) in row.iter_mut().enumerate() {
            let v = if in_ss(x, y) {
                let mut acc = 0.0;
                for oy in &offsets {
                    for ox in &offsets {
                        acc += raster.sample(x as f64 + ox, y as f64 + oy);
                    }
                }
                acc / (SUPERSAMPLE * SUPERSAMPLE) as f64
            } else {
                raster.sample(x as f64, y as f64)
            };
            *px = to_u8(v);
        }
    });
    Ok(RenderedFrame {
        image: GrayImage::new(width, height, data)?,
        meta,
    })
}

/// A rotation sweep of the gaze about a fixed camera-frame axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Vector3<f64>,
    pub angle_start_deg: f64,
    pub angle_end_deg: f64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
}

impl SweepSpec {
    /// Default focal length for a frame width (about 69° horizontal FOV).
    pub fn default_focal(width: usize) -> f64 {
        1400.0 * width as f64 / 1920.0
    }

    /// `frames` poses from `start` to `end` degrees about the camera y-axis.
    pub fn about_y(start: f64, end: f64, frames: usize, width: usize, height: usize) -> Self {
        Self {
            axis: Vector3::y(),
            angle_start_deg: start,
            angle_end_deg: end,
            frames,
            width,
            height,
            intrinsics: CameraIntrinsics::centered(Self::default_focal(width), width, height),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::InvalidParameter(
                "a sweep needs at least 2 frames".into(),
            ));
        }
        if self.axis.norm() == 0.0 {
            return Err(Error::InvalidParameter("sweep axis is zero".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter(
                "frame dimensions must be positive".into(),
            ));
        }
        self.intrinsics.validate()
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        let step = (self.angle_end_deg - self.angle_start_deg) / (self.frames - 1) as f64;
        (0..self.frames)
            .map(|i| {
                if i + 1 == self.frames {
                    self.angle_end_deg
                } else {
                    self.angle_start_deg + step * i as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPose {
    pub index: usize,
    pub angle_deg: f64,
    pub scene: EyeScene,
}

/// Base gaze tilted upward by `deg` about the camera x-axis, as in the
/// orientation experiments (the eye is pre-rotated before sweeping).
pub fn tilted_gaze(deg: f64) -> Vector3<f64> {
    let r = deg.to_radians();
    Vector3::new(0.0, r.sin(), -r.cos())
}

/// Scenes along a sweep; `template.gaze_normal` is the zero-angle pose.
pub fn generate_sweep(spec: &SweepSpec, template: &EyeScene) -> Result<Vec<SweepPose>> {
    spec.validate()?;
    template.validate()?;
    Ok(spec
        .angles_deg()
        .into_iter()
        .enumerate()
        .map(|(index, angle_deg)| SweepPose {
            index,
            angle_deg,
            scene: template.rotated(&spec.axis, angle_deg.to_radians()),
        })
        .collect())
}

/// Renders every pose of a sweep in parallel.
pub fn render_sweep(
    spec: &SweepSpec,
    template: &EyeScene,
) -> Result<Vec<(SweepPose, RenderedFrame)>> {
    let poses = generate_sweep(spec, template)?;
    poses
        .into_par_iter()
        .map(|pose| {
            let frame = render_frame(&pose.scene, &spec.intrinsics, spec.width, spec.height)?;
            Ok((pose, frame))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipse::fit_ellipse_direct;
    use crate::geometry::angle_between;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam1000() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 320.0, 240.0)
    }

    /// Scene whose iris centre sits at `iris_center` with the given normal.
    fn scene_with_iris(iris_center: Vector3<f64>, normal: Vector3<f64>, radius: f64) -> EyeScene {
        let mut s = EyeScene {
            iris_radius: radius,
            gaze_normal: normal.normalize(),
            ..Default::default()
        };
        s.eye_center = iris_center - s.gaze_normal * s.iris_depth();
        s
    }

    #[test]
    fn frontal_iris_is_a_circle() {
        let s = scene_with_iris(Vector3::new(0.0, 0.0, 50.0), -Vector3::z(), 6.0);
        let e = project_iris_ellipse(&s, &cam1000()).unwrap();
        assert_relative_eq!(e.major, 240.0, epsilon = 1e-9);
        assert_relative_eq!(e.minor, 240.0, epsilon = 1e-9);
        assert_relative_eq!(e.cx, 320.0, epsilon = 1e-9);
        assert_relative_eq!(e.cy, 240.0, epsilon = 1e-9);
    }

    /// Under full perspective the axis ratio of a centred, tilted circle is
    /// only approximately cos θ; the gap shrinks as (R/Z)².
    #[test]
    fn centred_tilt_ratio_approaches_cosine() {
        let normal = Vector3::new(30f64.to_radians().sin(), 0.0, -30f64.to_radians().cos());
        let mut prev_gap = f64::INFINITY;
        for z in [50.0, 100.0, 200.0, 400.0, 800.0] {
            let s = scene_with_iris(Vector3::new(0.0, 0.0, z), normal, 6.0);
            let e = project_iris_ellipse(&s, &cam1000()).unwrap();
            let gap = (e.minor / e.major - 30f64.to_radians().cos()).abs();
            assert!(gap < prev_gap);
            assert!(gap < 2.0 * (6.0 / z) * (6.0 / z), "z={z} gap={gap}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-4);
    }

    #[test]
    fn projection_matches_dense_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cam = cam1000();
        for _ in 0..10 {
            let normal = Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                -1.0,
            )
            .normalize();
            let c = Vector3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(60.0..300.0),
            );
            let s = scene_with_iris(c, normal, 5.9);
            let e = project_iris_ellipse(&s, &cam).unwrap();
            let (u, v) = s.iris_basis();
            let pts: Vec<_> = (0..10_000)
                .map(|i| {
                    let t = i as f64 * std::f64::consts::TAU / 10_000.0;
                    cam.project(&(c + (u * t.cos() + v * t.sin()) * 5.9))
                })
                .collect();
            let fit = fit_ellipse_direct(&pts).unwrap().ellipse;
            assert!((fit.cx - e.cx).abs() < 1e-6);
            assert!((fit.cy - e.cy).abs() < 1e-6);
            assert!((fit.major - e.major).abs() < 1e-6);
            assert!((fit.minor - e.minor).abs() < 1e-6);
            let dpsi = (fit.psi - e.psi).rem_euclid(std::f64::consts::PI);
            assert!(dpsi.min(std::f64::consts::PI - dpsi) < 1e-6);
        }
    }

    #[test]
    fn iris_plane_through_camera_is_degenerate() {
        let s = scene_with_iris(Vector3::new(0.0, 0.0, 50.0), Vector3::x(), 5.0);
        assert!(matches!(
            project_iris_ellipse(&s, &cam1000()),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn iris_behind_camera_is_out_of_view() {
        let s = scene_with_iris(Vector3::new(0.0, 0.0, -50.0), Vector3::z(), 5.0);
        assert!(matches!(
            project_iris_ellipse(&s, &cam1000()),
            Err(Error::OutOfView(_))
        ));
    }

    #[test]
    fn silhouette_of_centred_sphere() {
        let s = EyeScene::default();
        let e = project_eyeball_silhouette(&s, &cam1000()).unwrap();
        let z = s.eye_center.z;
        let r = s.eye_radius;
        let expected = 1000.0 * r / (z * z - r * r).sqrt();
        assert_relative_eq!(e.semi_major(), expected, epsilon = 1e-9);
        assert_relative_eq!(e.semi_minor(), expected, epsilon = 1e-9);
        assert_relative_eq!(e.cx, 320.0, epsilon = 1e-9);
    }

    #[test]
    fn negated_conic_converts_identically() {
        let e = Ellipse::new(5.0, 6.0, 30.0, 10.0, 0.4);
        let q = e.to_conic();
        let neg = Conic::from_matrix(-q.m).to_ellipse().unwrap();
        assert_relative_eq!(neg.major, e.major, epsilon = 1e-9);
        assert_relative_eq!(neg.minor, e.minor, epsilon = 1e-9);
        assert_relative_eq!(neg.psi, e.psi, epsilon = 1e-9);
    }

    fn frontal_scene() -> (EyeScene, CameraIntrinsics) {
        let cam = CameraIntrinsics::centered(700.0, 640, 480);
        (EyeScene::default(), cam)
    }

    #[test]
    fn iris_is_darker_than_sclera() {
        let (scene, cam) = frontal_scene();
        let f = render_frame(&scene, &cam, 640, 480).unwrap();
        let iris = f.meta.iris_mask();
        let eye = &f.meta.eyeball_silhouette;
        let (mut si, mut ni, mut ss, mut ns) = (0.0, 0, 0.0, 0);
        for y in 0..480 {
            for x in 0..640 {
                let p = Point2::new(x as f64, y as f64);
                let v = f.image.get(x, y) as f64;
                if iris.is_dark(x, y) {
                    si += v;
                    ni += 1;
                } else if eye.contains(&p) {
                    ss += v;
                    ns += 1;
                }
            }
        }
        assert!((si / ni as f64) < 0.5 * ss / ns as f64);
    }

    #[test]
    fn shadow_ramp_scales_left_to_right() {
        let (mut scene, cam) = frontal_scene();
        scene.shadow = Some(ShadowRamp {
            direction: [1.0, 0.0],
            strength: 0.5,
        });
        let f = render_frame(&scene, &cam, 640, 480).unwrap();
        let left = f.image.get(0, 0) as f64;
        let right = f.image.get(639, 0) as f64;
        assert!((right / left - 0.5).abs() < 0.01, "{left} {right}");
    }

    #[test]
    fn metadata_matches_projection() {
        let (scene, cam) = frontal_scene();
        let scene = scene.rotated(&Vector3::y(), 0.3);
        let f = render_frame(&scene, &cam, 640, 480).unwrap();
        assert_eq!(
            f.meta.iris_ellipse,
            project_iris_ellipse(&scene, &cam).unwrap()
        );
        assert_relative_eq!(f.meta.normal_gaze.x, -scene.gaze_normal.x);
    }

    #[test]
    fn metadata_mask_is_ellipse_interior() {
        let (scene, cam) = frontal_scene();
        let scene = scene.rotated(&Vector3::new(1.0, 1.0, 0.0), 0.4);
        let f = render_frame(&scene, &cam, 640, 480).unwrap();
        let mask = f.meta.iris_mask();
        let conic = f.meta.iris_ellipse.to_conic();
        // Sign of the conic inside the ellipse (negative for this normalisation).
        let inside_sign = conic
            .eval(f.meta.iris_ellipse.cx, f.meta.iris_ellipse.cy)
            .signum();
        for y in 0..480 {
            for x in 0..640 {
                let inside = conic.eval(x as f64, y as f64) * inside_sign > 0.0;
                assert_eq!(mask.is_dark(x, y), inside);
            }
        }
        assert!(mask.count_dark() > 1000);
    }

    #[test]
    fn eye_leaving_frame_is_out_of_view() {
        let (mut scene, cam) = frontal_scene();
        scene.eye_center.x = 200.0;
        assert!(matches!(
            render_frame(&scene, &cam, 640, 480),
            Err(Error::OutOfView(_))
        ));
    }

    #[test]
    fn glints_are_bright_spots_in_iris() {
        let (mut scene, cam) = frontal_scene();
        scene.glints.push(Glint {
            offset: [0.0, 0.0],
            radius_px: 3.0,
            intensity: 1.0,
        });
        let f = render_frame(&scene, &cam, 640, 480).unwrap();
        let c = f.meta.iris_center_projected_px;
        assert_eq!(f.image.get(c.x.round() as usize, c.y.round() as usize), 255);
    }

    #[test]
    fn sweep_angles() {
        let spec = SweepSpec::about_y(-30.0, 30.0, 13, 640, 360);
        let angles = spec.angles_deg();
        assert_eq!(angles.len(), 13);
        for (i, a) in angles.iter().enumerate() {
            assert_relative_eq!(*a, -30.0 + 5.0 * i as f64, epsilon = 1e-12);
        }
        let two = SweepSpec::about_y(-30.0, 30.0, 2, 640, 360).angles_deg();
        assert_eq!(two, vec![-30.0, 30.0]);
        let bad = SweepSpec::about_y(-30.0, 30.0, 1, 640, 360);
        assert!(generate_sweep(&bad, &EyeScene::default()).is_err());
    }

    #[test]
    fn sweep_rotates_about_axis() {
        let spec = SweepSpec::about_y(-30.0, 30.0, 300, 640, 360);
        let template = EyeScene {
            gaze_normal: tilted_gaze(30.0),
            ..Default::default()
        };
        let poses = generate_sweep(&spec, &template).unwrap();
        assert_eq!(poses.len(), 300);
        for p in &poses {
            assert_relative_eq!(p.scene.gaze_normal.y, 0.5, epsilon = 1e-12);
            let flat = Vector3::new(p.scene.gaze_normal.x, 0.0, p.scene.gaze_normal.z);
            assert_relative_eq!(
                angle_between(&flat, &Vector3::new(0.0, 0.0, -1.0)).to_degrees(),
                p.angle_deg.abs(),
                epsilon = 1e-9
            );
        }
    }
}
