//! Fixtures shared by the benchmarks.

use gaze_pose::ellipse::Ellipse;
use gaze_pose::roi::oracle_roi;
use gaze_pose::synth::{render_frame, tilted_gaze, EyeScene, RenderedFrame, SweepSpec};
use gaze_pose::{CameraIntrinsics, RoiPair};
use nalgebra::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One rendered frame of the default tilted eye with its oracle boxes.
pub struct Frame {
    pub cam: CameraIntrinsics,
    pub rendered: RenderedFrame,
    pub rois: RoiPair,
}

pub fn frame(width: usize, height: usize) -> Frame {
    let cam = CameraIntrinsics::centered(SweepSpec::default_focal(width), width, height);
    let scene = EyeScene {
        gaze_normal: tilted_gaze(30.0),
        ..EyeScene::default()
    }
    .rotated(&nalgebra::Vector3::y(), 15f64.to_radians());
    let rendered = render_frame(&scene, &cam, width, height).expect("scene in view");
    let rois = oracle_roi(&scene, &cam, 0.2, width, height).expect("boxes in frame");
    Frame {
        cam,
        rendered,
        rois,
    }
}

/// `n` points: the first `outliers` uniform over the ellipse's bounding box,
/// the rest exactly on the rim.
pub fn noisy_rim(truth: &Ellipse, n: usize, outliers: usize, seed: u64) -> Vec<Point2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hx, hy) = truth.half_extents();
    (0..n)
        .map(|i| {
            if i < outliers {
                Point2::new(
                    truth.cx + hx * rng.random_range(-1.0..1.0),
                    truth.cy + hy * rng.random_range(-1.0..1.0),
                )
            } else {
                truth.point_at(rng.random_range(0.0..std::f64::consts::TAU))
            }
        })
        .collect()
}
