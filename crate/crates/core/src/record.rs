//! Flat per-frame output records (one JSON object per line) and CSV summaries.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::ellipse::Ellipse;
use crate::error::Result;
use crate::geometry::Disambiguation;
use crate::track::{FrameResult, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: String,
    pub index: usize,
    pub ellipse: Option<Ellipse>,
    /// Iris centre, gaze frame, millimetres.
    pub position_mm: Option<Vector3<f64>>,
    /// Unit gaze normal toward the camera, gaze frame.
    pub normal: Option<Vector3<f64>>,
    pub theta: Option<f64>,
    pub psi: Option<f64>,
    pub gamma: Option<f64>,
    pub disambiguation: Option<Disambiguation>,
    pub lost: bool,
    pub center_error_px: Option<f64>,
    pub normal_error_deg: Option<f64>,
    pub error: Option<String>,
    /// Wall-clock processing time. Only written when requested, since it
    /// breaks byte-identical reruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl FrameRecord {
    pub fn from_result(frame: impl Into<String>, r: &FrameResult, timing_ms: Option<f64>) -> Self {
        let est = r.estimate.as_ref();
        Self {
            frame: frame.into(),
            index: r.index,
            ellipse: r.ellipse,
            position_mm: est.map(|e| e.position),
            normal: est.map(|e| e.normal),
            theta: est.map(|e| e.theta),
            psi: est.map(|e| e.psi),
            gamma: est.map(|e| e.gamma),
            disambiguation: est.map(|e| e.disambiguation),
            lost: r.lost,
            center_error_px: r.center_error_px,
            normal_error_deg: r.normal_error_deg,
            error: r.error.clone(),
            timing_ms,
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub const SUMMARY_HEADER: &str =
    "label,frames,lost,center_error_mean_px,center_error_std_px,normal_error_mean_deg,normal_error_max_deg\n";

/// One CSV row (no header). Absent statistics are empty cells.
pub fn summary_csv_row(label: &str, s: &Summary) -> String {
    format!(
        "{label},{},{},{},{},{},{}\n",
        s.frames,
        s.lost,
        opt(s.center_error_mean_px),
        opt(s.center_error_std_px),
        opt(s.normal_error_mean_deg),
        opt(s.normal_error_max_deg)
    )
}
