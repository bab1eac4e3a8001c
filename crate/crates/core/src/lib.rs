//! Monocular 3-D eye pose from iris ellipse unprojection.
//!
//! The pipeline thresholds an eye ROI, takes the convex hull of the largest
//! dark blob, fits an ellipse robustly, and lifts it to a 3-D iris position
//! and normal. Synthetic rendering, ROI providers, a frame tracker and a
//! servo simulation sit on top.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod ellipse;
pub mod error;
pub mod geometry;
pub mod imgproc;
pub mod pipeline;
pub mod record;
pub mod roi;
pub mod servo;
pub mod synth;
pub mod track;

pub use config::Config;
pub use ellipse::{
    fit_ellipse_direct, ransac_fit_ellipse, Conic, Ellipse, EllipseFit, RansacConfig, RansacFit,
};
pub use error::{Error, ErrorKind, Result};
pub use geometry::{
    estimate_gaze, CameraIntrinsics, CorrectionAxis, Disambiguation, GazeConfig, GazeEstimate,
    IrisModel,
};
pub use imgproc::{BinaryMask, GrayImage, Roi, Threshold};
pub use pipeline::{detect_iris, estimate_frame, PipelineConfig, RoiProvider};
pub use record::FrameRecord;
pub use roi::RoiPair;
pub use servo::{run_servo_experiment, ServoExperiment, ServoReport};
pub use synth::{render_frame, EyeScene, FrameMeta, RenderedFrame, SweepSpec};
pub use track::{summarize, FrameResult, GroundTruth, Summary, TrackerState};
