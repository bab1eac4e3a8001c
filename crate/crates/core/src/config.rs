//! Flat `key = value` run configuration. Every tunable constant lives here
//! with an explicit default so a run can be reproduced from one file.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ellipse::RansacConfig;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CorrectionAxis, GazeConfig, IrisModel};
use crate::imgproc::{Threshold, DEFAULT_K};
use crate::pipeline::PipelineConfig;
use crate::roi::ScleraCenter;
use crate::servo::{EstimateSource, ServoExperiment, DEFAULT_STANDOFF_MM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiProviderKind {
    Oracle,
    Sidecar,
    Intensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Adaptive,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServoNoise {
    None,
    Table,
}

/// Text names for the enum-valued keys.
trait Named: Sized + Copy + 'static {
    const ALL: &'static [(Self, &'static str)];

    fn name(self) -> &'static str
    where
        Self: PartialEq,
    {
        Self::ALL
            .iter()
            .find(|(v, _)| *v == self)
            .map(|(_, n)| *n)
            .unwrap()
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().find(|(_, n)| *n == s).map(|(v, _)| *v)
    }
}

impl Named for RoiProviderKind {
    const ALL: &'static [(Self, &'static str)] = &[
        (RoiProviderKind::Oracle, "oracle"),
        (RoiProviderKind::Sidecar, "sidecar"),
        (RoiProviderKind::Intensity, "intensity"),
    ];
}

impl Named for ThresholdMode {
    const ALL: &'static [(Self, &'static str)] = &[
        (ThresholdMode::Adaptive, "adaptive"),
        (ThresholdMode::Fixed, "fixed"),
    ];
}

impl Named for ServoNoise {
    const ALL: &'static [(Self, &'static str)] =
        &[(ServoNoise::None, "none"), (ServoNoise::Table, "table")];
}

impl Named for CorrectionAxis {
    const ALL: &'static [(Self, &'static str)] = &[
        (CorrectionAxis::ZCrossU, "z_cross_u"),
        (CorrectionAxis::Printed, "printed"),
    ];
}

impl Named for ScleraCenter {
    const ALL: &'static [(Self, &'static str)] = &[
        (ScleraCenter::BoxCenter, "box_center"),
        (ScleraCenter::BrightCentroid, "bright_centroid"),
    ];
}

impl std::str::FromStr for RoiProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown ROI provider {s:?}")))
    }
}

impl std::fmt::Display for RoiProviderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// `None` means: take intrinsics from the dataset or frame metadata, else
    /// a centred default for the image size.
    pub intrinsics: Option<CameraIntrinsics>,
    pub iris_radius_mm: f64,
    pub threshold_mode: ThresholdMode,
    pub threshold_k: f64,
    pub threshold_fixed: f64,
    pub ransac: RansacConfig,
    pub ambiguity_eps_px: f64,
    pub max_carried_frames: u32,
    pub correction_axis: CorrectionAxis,
    pub roi_provider: RoiProviderKind,
    pub roi_margin: f64,
    /// `None` lets the provider choose.
    pub sclera_center: Option<ScleraCenter>,
    pub servo_standoff_mm: f64,
    pub servo_max_step_mm: f64,
    pub servo_max_step_deg: f64,
    pub servo_ticks_per_pose: usize,
    pub servo_noise: ServoNoise,
    pub seed: u64,
    pub record_timing: bool,
}

impl Default for Config {
    fn default() -> Self {
        let servo = ServoExperiment::default();
        Self {
            intrinsics: None,
            iris_radius_mm: IrisModel::default().radius_mm,
            threshold_mode: ThresholdMode::Adaptive,
            threshold_k: DEFAULT_K,
            threshold_fixed: 128.0,
            ransac: RansacConfig::default(),
            ambiguity_eps_px: GazeConfig::default().ambiguity_eps_px,
            max_carried_frames: GazeConfig::default().max_carried_frames,
            correction_axis: CorrectionAxis::default(),
            roi_provider: RoiProviderKind::Oracle,
            roi_margin: 0.2,
            sclera_center: None,
            servo_standoff_mm: DEFAULT_STANDOFF_MM,
            servo_max_step_mm: servo.max_step_mm,
            servo_max_step_deg: servo.max_step_deg,
            servo_ticks_per_pose: servo.ticks_per_pose,
            servo_noise: ServoNoise::Table,
            seed: 7,
            record_timing: false,
        }
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if let Some(cam) = &self.intrinsics {
            cam.validate()?;
        }
        if !(self.iris_radius_mm > 0.0 && self.iris_radius_mm.is_finite()) {
            return bad("iris_radius_mm must be positive");
        }
        if !(self.threshold_k > 0.0 && self.threshold_k < 1.0) {
            return bad("threshold_k must lie in (0, 1)");
        }
        if !(0.0..=255.0).contains(&self.threshold_fixed) {
            return bad("threshold_fixed must lie in [0, 255]");
        }
        self.ransac.validate()?;
        if !(self.ambiguity_eps_px >= 0.0 && self.ambiguity_eps_px.is_finite()) {
            return bad("ambiguity_eps_px must be non-negative");
        }
        if !(self.roi_margin >= 0.0 && self.roi_margin.is_finite()) {
            return bad("roi_margin must be non-negative");
        }
        if !(self.servo_standoff_mm > 0.0 && self.servo_standoff_mm.is_finite()) {
            return bad("servo_standoff_mm must be positive");
        }
        if !(self.servo_max_step_mm > 0.0 && self.servo_max_step_deg > 0.0) {
            return bad("servo step limits must be positive");
        }
        if self.servo_ticks_per_pose == 0 {
            return bad("servo_ticks_per_pose must be at least 1");
        }
        Ok(())
    }

    pub fn threshold(&self) -> Threshold {
        match self.threshold_mode {
            ThresholdMode::Adaptive => Threshold::Adaptive {
                k: self.threshold_k,
            },
            ThresholdMode::Fixed => Threshold::Fixed(self.threshold_fixed),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            threshold: self.threshold(),
            ransac: self.ransac,
            gaze: GazeConfig {
                axis: self.correction_axis,
                ambiguity_eps_px: self.ambiguity_eps_px,
                max_carried_frames: self.max_carried_frames,
            },
            iris: IrisModel {
                radius_mm: self.iris_radius_mm,
            },
            sclera_center: self.sclera_center,
        }
    }

    pub fn servo_experiment(&self, poses_deg: Vec<f64>) -> ServoExperiment {
        ServoExperiment {
            poses_deg,
            iris_radius: self.iris_radius_mm,
            standoff: self.servo_standoff_mm,
            max_step_mm: self.servo_max_step_mm,
            max_step_deg: self.servo_max_step_deg,
            ticks_per_pose: self.servo_ticks_per_pose,
            source: match self.servo_noise {
                ServoNoise::None => EstimateSource::Truth,
                ServoNoise::Table => EstimateSource::Noisy { seed: self.seed },
            },
            ..Default::default()
        }
    }

    /// Serialises every key, with a short comment per group.
    pub fn to_text(&self) -> String {
        let cam = self.intrinsics;
        let lines: Vec<(&str, String)> = vec![
            (
                "# camera intrinsics in pixels; auto = from dataset or image size",
                String::new(),
            ),
            ("fx", opt_f64(cam.map(|c| c.fx))),
            ("fy", opt_f64(cam.map(|c| c.fy))),
            ("cx", opt_f64(cam.map(|c| c.cx))),
            ("cy", opt_f64(cam.map(|c| c.cy))),
            ("iris_radius_mm", self.iris_radius_mm.to_string()),
            (
                "# binarisation: adaptive uses mean * k, fixed uses threshold_fixed",
                String::new(),
            ),
            ("threshold", self.threshold_mode.name().into()),
            ("threshold_k", self.threshold_k.to_string()),
            ("threshold_fixed", self.threshold_fixed.to_string()),
            ("ransac_iterations", self.ransac.iterations.to_string()),
            ("ransac_inlier_tol_px", self.ransac.inlier_tol.to_string()),
            (
                "ransac_min_inlier_frac",
                self.ransac.min_inlier_frac.to_string(),
            ),
            ("ransac_seed", self.ransac.seed.to_string()),
            ("ambiguity_eps_px", self.ambiguity_eps_px.to_string()),
            ("max_carried_frames", self.max_carried_frames.to_string()),
            ("correction_axis", self.correction_axis.name().into()),
            (
                "# roi_provider: oracle | sidecar | intensity",
                String::new(),
            ),
            ("roi_provider", self.roi_provider.name().into()),
            ("roi_margin", self.roi_margin.to_string()),
            (
                "sclera_center",
                self.sclera_center.map_or("auto", |c| c.name()).into(),
            ),
            ("servo_standoff_mm", self.servo_standoff_mm.to_string()),
            ("servo_max_step_mm", self.servo_max_step_mm.to_string()),
            ("servo_max_step_deg", self.servo_max_step_deg.to_string()),
            (
                "servo_ticks_per_pose",
                self.servo_ticks_per_pose.to_string(),
            ),
            ("servo_noise", self.servo_noise.name().into()),
            ("seed", self.seed.to_string()),
            ("record_timing", self.record_timing.to_string()),
        ];
        let mut out = String::new();
        for (key, value) in lines {
            if key.starts_with('#') {
                writeln!(out, "{key}").unwrap();
            } else {
                writeln!(out, "{key} = {value}").unwrap();
            }
        }
        out
    }

    /// Parses config text on top of the defaults. Unknown keys are errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        let mut cam: [Option<f64>; 4] = cfg.intrinsics.map_or([None; 4], |c| {
            [Some(c.fx), Some(c.fy), Some(c.cx), Some(c.cy)]
        });
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key = value, found {content:?}")))?;
            fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
                v.parse().map_err(|_| format!("bad value {v:?}"))
            }
            fn named<T: Named>(v: &str) -> std::result::Result<T, String> {
                T::from_name(v).ok_or_else(|| {
                    let options: Vec<_> = T::ALL.iter().map(|(_, n)| *n).collect();
                    format!("bad value {v:?}, expected one of {}", options.join(", "))
                })
            }
            let auto_f64 = |v: &str| {
                if v == "auto" {
                    Ok(None)
                } else {
                    num(v).map(Some)
                }
            };
            let res: std::result::Result<(), String> = (|| {
                match key {
                    "fx" => cam[0] = auto_f64(value)?,
                    "fy" => cam[1] = auto_f64(value)?,
                    "cx" => cam[2] = auto_f64(value)?,
                    "cy" => cam[3] = auto_f64(value)?,
                    "iris_radius_mm" => cfg.iris_radius_mm = num(value)?,
                    "threshold" => cfg.threshold_mode = named(value)?,
                    "threshold_k" => cfg.threshold_k = num(value)?,
                    "threshold_fixed" => cfg.threshold_fixed = num(value)?,
                    "ransac_iterations" => cfg.ransac.iterations = num(value)?,
                    "ransac_inlier_tol_px" => cfg.ransac.inlier_tol = num(value)?,
                    "ransac_min_inlier_frac" => cfg.ransac.min_inlier_frac = num(value)?,
                    "ransac_seed" => cfg.ransac.seed = num(value)?,
                    "ambiguity_eps_px" => cfg.ambiguity_eps_px = num(value)?,
                    "max_carried_frames" => cfg.max_carried_frames = num(value)?,
                    "correction_axis" => cfg.correction_axis = named(value)?,
                    "roi_provider" => cfg.roi_provider = named(value)?,
                    "roi_margin" => cfg.roi_margin = num(value)?,
                    "sclera_center" => {
                        cfg.sclera_center = if value == "auto" {
                            None
                        } else {
                            Some(named(value)?)
                        }
                    }
                    "servo_standoff_mm" => cfg.servo_standoff_mm = num(value)?,
                    "servo_max_step_mm" => cfg.servo_max_step_mm = num(value)?,
                    "servo_max_step_deg" => cfg.servo_max_step_deg = num(value)?,
                    "servo_ticks_per_pose" => cfg.servo_ticks_per_pose = num(value)?,
                    "servo_noise" => cfg.servo_noise = named(value)?,
                    "seed" => cfg.seed = num(value)?,
                    "record_timing" => cfg.record_timing = num(value)?,
                    _ => return Err(format!("unknown key {key:?}")),
                }
                Ok(())
            })();
            res.map_err(err)?;
        }
        cfg.intrinsics = match cam {
            [Some(fx), Some(fy), Some(cx), Some(cy)] => Some(CameraIntrinsics::new(fx, fy, cx, cy)),
            [None, None, None, None] => None,
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    msg: "fx, fy, cx, cy must all be set or all be auto".into(),
                })
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
