//! Frame-to-frame tracking with loss bookkeeping.

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::ellipse::Ellipse;
use crate::error::{Error, Result};
use crate::geometry::{angle_between, CameraIntrinsics, GazeEstimate};
use crate::imgproc::GrayImage;
use crate::pipeline::{estimate_frame, PipelineConfig, RoiProvider};

/// Centre deviation above which a frame counts as lost, pixels.
pub const LOSS_THRESHOLD_PX: f64 = 30.0;

/// Reference values for one frame, when known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub center_px: Point2<f64>,
    /// Gaze-frame normal pointing toward the camera.
    pub normal: Option<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub index: usize,
    pub estimate: Option<GazeEstimate>,
    pub ellipse: Option<Ellipse>,
    pub center_px: Option<Point2<f64>>,
    pub center_error_px: Option<f64>,
    pub normal_error_deg: Option<f64>,
    pub lost: bool,
    /// Pipeline failure, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackerState {
    pub prev_estimate: Option<GazeEstimate>,
    pub prev_center_px: Option<Point2<f64>>,
    pub lost_frames: usize,
    /// Consecutive frames whose ambiguity was not decided geometrically.
    pub consecutive_fallbacks: usize,
    pub frames_seen: usize,
}

impl TrackerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs the pipeline on one frame. Never fails: errors become lost frames.
    pub fn process_frame(
        &mut self,
        index: usize,
        img: &GrayImage,
        provider: &dyn RoiProvider,
        cam: &CameraIntrinsics,
        cfg: &PipelineConfig,
        truth: Option<&GroundTruth>,
    ) -> FrameResult {
        self.process_frame_with_error(index, img, provider, cam, cfg, truth)
            .0
    }

    /// As [`process_frame`](Self::process_frame), also handing back the
    /// pipeline error of a failed frame.
    pub fn process_frame_with_error(
        &mut self,
        index: usize,
        img: &GrayImage,
        provider: &dyn RoiProvider,
        cam: &CameraIntrinsics,
        cfg: &PipelineConfig,
        truth: Option<&GroundTruth>,
    ) -> (FrameResult, Option<Error>) {
        match estimate_frame(img, provider, cam, cfg, self.prev_estimate.as_ref()) {
            Ok((det, est)) => (self.accept(index, det.fit.ellipse, est, truth), None),
            Err(e) => (self.record_failure(index, &e), Some(e)),
        }
    }

    /// Records a frame that could not be processed at all (unreadable file, ...).
    pub fn record_failure(&mut self, index: usize, err: &Error) -> FrameResult {
        self.frames_seen += 1;
        self.lost_frames += 1;
        FrameResult {
            index,
            estimate: None,
            ellipse: None,
            center_px: None,
            center_error_px: None,
            normal_error_deg: None,
            lost: true,
            error: Some(err.to_string()),
        }
    }

    fn accept(
        &mut self,
        index: usize,
        ellipse: Ellipse,
        est: GazeEstimate,
        truth: Option<&GroundTruth>,
    ) -> FrameResult {
        self.frames_seen += 1;
        let center = ellipse.center();
        let center_error_px = truth.map(|t| (center - t.center_px).norm());
        let lost = match (center_error_px, self.prev_center_px) {
            (Some(err), _) => err > LOSS_THRESHOLD_PX,
            (None, Some(prev)) => (center - prev).norm() > LOSS_THRESHOLD_PX,
            (None, None) => false,
        };
        let normal_error_deg = truth
            .and_then(|t| t.normal)
            .map(|n| angle_between(&est.normal, &n).to_degrees());

        self.prev_center_px = Some(center);
        if lost {
            self.lost_frames += 1;
        } else {
            self.prev_estimate = Some(est);
        }
        if est.ambiguity_resolved() {
            self.consecutive_fallbacks = 0;
        } else {
            self.consecutive_fallbacks += 1;
        }
        FrameResult {
            index,
            estimate: Some(est),
            ellipse: Some(ellipse),
            center_px: Some(center),
            center_error_px,
            normal_error_deg,
            lost,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub frames: usize,
    pub lost: usize,
    /// Statistics over frames that were not lost; `None` when there are none
    /// or no ground truth was available.
    pub center_error_mean_px: Option<f64>,
    pub center_error_std_px: Option<f64>,
    pub normal_error_mean_deg: Option<f64>,
    pub normal_error_max_deg: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Lost frames are excluded from every error statistic. Standard deviation
/// is the population form.
pub fn summarize(results: &[FrameResult]) -> Result<Summary> {
    if results.is_empty() {
        return Err(Error::EmptyInput("no frame results to summarise"));
    }
    let kept: Vec<&FrameResult> = results.iter().filter(|r| !r.lost).collect();
    let centers: Vec<f64> = kept.iter().filter_map(|r| r.center_error_px).collect();
    let normals: Vec<f64> = kept.iter().filter_map(|r| r.normal_error_deg).collect();
    let (center_error_mean_px, center_error_std_px) = mean_std(&centers);
    Ok(Summary {
        frames: results.len(),
        lost: results.len() - kept.len(),
        center_error_mean_px,
        center_error_std_px,
        normal_error_mean_deg: mean_std(&normals).0,
        normal_error_max_deg: normals.iter().cloned().reduce(f64::max),
    })
}
