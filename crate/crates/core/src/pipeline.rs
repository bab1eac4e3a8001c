//! Single-frame composition: ROI, binarisation, hull, robust ellipse fit,
//! gaze estimate.

use std::path::PathBuf;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::ellipse::{ransac_fit_ellipse, RansacConfig, RansacFit};
use crate::error::{Error, Result};
use crate::geometry::{estimate_gaze, CameraIntrinsics, GazeConfig, GazeEstimate, IrisModel};
use crate::imgproc::{binarize, select_largest_hull, GrayImage, Threshold};
use crate::roi::{intensity_roi, load_sidecar_boxes, oracle_roi, RoiPair, ScleraCenter};
use crate::synth::EyeScene;

/// Source of iris and sclera boxes for one frame.
pub trait RoiProvider {
    fn locate(&self, img: &GrayImage) -> Result<RoiPair>;

    /// Sclera reference used when the pipeline config does not override it.
    fn sclera_center(&self) -> ScleraCenter {
        ScleraCenter::BoxCenter
    }
}

impl RoiProvider for RoiPair {
    fn locate(&self, img: &GrayImage) -> Result<RoiPair> {
        self.iris_roi.check_within(img.width(), img.height())?;
        self.sclera_roi.check_within(img.width(), img.height())?;
        Ok(*self)
    }
}

/// Ground-truth boxes from a known scene.
#[derive(Debug, Clone)]
pub struct OracleRoi<'a> {
    pub scene: &'a EyeScene,
    pub cam: &'a CameraIntrinsics,
    pub margin: f64,
}

impl RoiProvider for OracleRoi<'_> {
    fn locate(&self, img: &GrayImage) -> Result<RoiPair> {
        oracle_roi(self.scene, self.cam, self.margin, img.width(), img.height())
    }
}

/// Boxes replayed from a sidecar text file.
#[derive(Debug, Clone)]
pub struct SidecarRoi(pub PathBuf);

impl RoiProvider for SidecarRoi {
    fn locate(&self, img: &GrayImage) -> Result<RoiPair> {
        load_sidecar_boxes(&self.0, img.width(), img.height())
    }
}

/// Largest-dark-blob heuristic.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntensityRoi;

impl RoiProvider for IntensityRoi {
    fn locate(&self, img: &GrayImage) -> Result<RoiPair> {
        intensity_roi(img)
    }

    fn sclera_center(&self) -> ScleraCenter {
        ScleraCenter::BrightCentroid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub threshold: Threshold,
    pub ransac: RansacConfig,
    pub gaze: GazeConfig,
    pub iris: IrisModel,
    /// Overrides the provider's preferred sclera reference.
    pub sclera_center: Option<ScleraCenter>,
}

/// Everything measured in the image before lifting to 3-D.
#[derive(Debug, Clone, PartialEq)]
pub struct IrisDetection {
    pub rois: RoiPair,
    /// Hull vertices in image coordinates.
    pub hull: Vec<Point2<f64>>,
    pub fit: RansacFit,
    pub sclera_center_px: Point2<f64>,
}

/// Image stages only: threshold the iris box, hull the largest dark blob,
/// fit an ellipse robustly.
pub fn detect_iris(
    img: &GrayImage,
    provider: &dyn RoiProvider,
    cfg: &PipelineConfig,
) -> Result<IrisDetection> {
    let rois = provider.locate(img)?;
    let mask = binarize(img, &rois.iris_roi, cfg.threshold)?;
    if mask.is_empty() {
        return Err(Error::Detection(format!(
            "no dark pixels in iris region {}",
            rois.iris_roi
        )));
    }
    let hull = select_largest_hull(&mask)?.to_image(&rois.iris_roi);
    let fit = ransac_fit_ellipse(&hull, &cfg.ransac)?;
    let sclera_center_px = cfg
        .sclera_center
        .unwrap_or_else(|| provider.sclera_center())
        .locate(img, &rois)?;
    Ok(IrisDetection {
        rois,
        hull,
        fit,
        sclera_center_px,
    })
}

/// Full single-frame pipeline.
pub fn estimate_frame(
    img: &GrayImage,
    provider: &dyn RoiProvider,
    cam: &CameraIntrinsics,
    cfg: &PipelineConfig,
    prev: Option<&GazeEstimate>,
) -> Result<(IrisDetection, GazeEstimate)> {
    let det = detect_iris(img, provider, cfg)?;
    let est = estimate_gaze(
        &det.fit.ellipse,
        &det.sclera_center_px,
        cam,
        &cfg.iris,
        prev,
        &cfg.gaze,
    )?;
    Ok((det, est))
}
