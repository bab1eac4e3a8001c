//! Iris and sclera bounding boxes: ground-truth, replayed detector files,
//! and an intensity heuristic.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::imgproc::{adaptive_threshold, connected_dark_components, GrayImage, Roi, DEFAULT_K};
use crate::synth::{project_eyeball_silhouette, project_iris_ellipse, EyeScene};

pub const IRIS_CLASS: u8 = 0;
pub const SCLERA_CLASS: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiPair {
    pub iris_roi: Roi,
    pub sclera_roi: Roi,
    pub confidence: f64,
}

impl RoiPair {
    /// The iris box normally sits inside the sclera box. Violations are
    /// tolerated; callers may want to log them.
    pub fn is_nested(&self) -> bool {
        self.sclera_roi.contains_roi(&self.iris_roi)
    }
}

/// How the sclera reference point for disambiguation is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScleraCenter {
    #[default]
    BoxCenter,
    /// Centroid of pixels at or above the adaptive threshold inside the sclera box.
    BrightCentroid,
}

impl ScleraCenter {
    pub fn locate(self, img: &GrayImage, pair: &RoiPair) -> Result<Point2<f64>> {
        let roi = &pair.sclera_roi;
        match self {
            ScleraCenter::BoxCenter => {
                let (x, y) = roi.center();
                Ok(Point2::new(x, y))
            }
            ScleraCenter::BrightCentroid => {
                let mask = adaptive_threshold(img, roi, DEFAULT_K)?;
                let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
                for y in 0..roi.h {
                    for x in 0..roi.w {
                        if !mask.is_dark(x, y) {
                            sx += x as f64;
                            sy += y as f64;
                            n += 1;
                        }
                    }
                }
                if n == 0 {
                    return Err(Error::Detection("sclera box has no bright pixels".into()));
                }
                Ok(Point2::new(
                    roi.x0 as f64 + sx / n as f64,
                    roi.y0 as f64 + sy / n as f64,
                ))
            }
        }
    }
}

/// Axis-aligned box around an ellipse's extent, inflated about its centre.
fn inflated_box(
    cx: f64,
    cy: f64,
    half_w: f64,
    half_h: f64,
    scale: f64,
    width: usize,
    height: usize,
) -> Result<Roi> {
    let (hw, hh) = (half_w * scale, half_h * scale);
    Roi::from_extent(cx - hw, cy - hh, cx + hw, cy + hh, width, height)
}

/// Ground-truth boxes from the scene: the projected iris ellipse and the
/// eyeball silhouette, each grown by `margin` (0.2 = 20 % larger half-extent).
pub fn oracle_roi(
    scene: &EyeScene,
    cam: &CameraIntrinsics,
    margin: f64,
    width: usize,
    height: usize,
) -> Result<RoiPair> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "margin must be non-negative, got {margin}"
        )));
    }
    if scene.iris_center().z <= 0.0 || scene.eye_center.z <= 0.0 {
        return Err(Error::OutOfView("eye is behind the camera".into()));
    }
    let iris = project_iris_ellipse(scene, cam)?;
    let eye = project_eyeball_silhouette(scene, cam)?;
    let in_frame = |(x0, y0, x1, y1): (f64, f64, f64, f64)| {
        x0 >= -0.5 && y0 >= -0.5 && x1 <= width as f64 - 0.5 && y1 <= height as f64 - 0.5
    };
    if !in_frame(iris.bounding_box()) {
        return Err(Error::OutOfView("iris projects outside the frame".into()));
    }
    let (ihw, ihh) = iris.half_extents();
    let (ehw, ehh) = eye.half_extents();
    Ok(RoiPair {
        iris_roi: inflated_box(iris.cx, iris.cy, ihw, ihh, 1.0 + margin, width, height)?,
        sclera_roi: inflated_box(eye.cx, eye.cy, ehw, ehh, 1.0 + margin, width, height)?,
        confidence: 1.0,
    })
}

/// One `class cx cy w h` record, all normalised to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRecord {
    pub class: u8,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoxRecord {
    pub fn from_roi(class: u8, roi: &Roi, width: usize, height: usize) -> Self {
        let (wf, hf) = (width as f64, height as f64);
        Self {
            class,
            cx: (roi.x0 as f64 + roi.w as f64 / 2.0) / wf,
            cy: (roi.y0 as f64 + roi.h as f64 / 2.0) / hf,
            w: roi.w as f64 / wf,
            h: roi.h as f64 / hf,
        }
    }

    /// Pixel window spanned by the record, clamped to the image.
    pub fn to_roi(&self, width: usize, height: usize) -> Result<Roi> {
        let (wf, hf) = (width as f64, height as f64);
        let x0 = ((self.cx - self.w / 2.0) * wf).round().clamp(0.0, wf);
        let x1 = ((self.cx + self.w / 2.0) * wf).round().clamp(0.0, wf);
        let y0 = ((self.cy - self.h / 2.0) * hf).round().clamp(0.0, hf);
        let y1 = ((self.cy + self.h / 2.0) * hf).round().clamp(0.0, hf);
        Roi::new(
            x0 as usize,
            y0 as usize,
            (x1 - x0) as usize,
            (y1 - y0) as usize,
        )
    }
}

pub fn format_sidecar(pair: &RoiPair, width: usize, height: usize) -> String {
    let mut out = String::new();
    for (class, roi) in [
        (IRIS_CLASS, &pair.iris_roi),
        (SCLERA_CLASS, &pair.sclera_roi),
    ] {
        let r = BoxRecord::from_roi(class, roi, width, height);
        writeln!(
            out,
            "{} {:.6} {:.6} {:.6} {:.6}",
            r.class, r.cx, r.cy, r.w, r.h
        )
        .unwrap();
    }
    out
}

pub fn write_sidecar(
    path: impl AsRef<Path>,
    pair: &RoiPair,
    width: usize,
    height: usize,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_sidecar(pair, width, height)).map_err(|e| Error::io(path, e))
}

/// Parses sidecar text. `path` is only used in error messages.
pub fn parse_sidecar(text: &str, path: &Path, width: usize, height: usize) -> Result<RoiPair> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut slots: [Option<(usize, Roi)>; 2] = [None, None];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(
                line,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let class: u8 = fields[0]
            .parse()
            .map_err(|_| err(line, format!("bad class id {:?}", fields[0])))?;
        if class > SCLERA_CLASS {
            return Err(err(line, format!("unknown class id {class}")));
        }
        let mut vals = [0.0; 4];
        for (v, f) in vals.iter_mut().zip(&fields[1..]) {
            *v = f
                .parse()
                .map_err(|_| err(line, format!("bad number {f:?}")))?;
            if !(0.0..=1.0).contains(v) {
                return Err(err(line, format!("value {v} outside [0, 1]")));
            }
        }
        let rec = BoxRecord {
            class,
            cx: vals[0],
            cy: vals[1],
            w: vals[2],
            h: vals[3],
        };
        let roi = rec
            .to_roi(width, height)
            .map_err(|e| err(line, e.to_string()))?;
        let slot = &mut slots[class as usize];
        if let Some((first, _)) = slot {
            return Err(err(
                line,
                format!("duplicate class {class} (first on line {first})"),
            ));
        }
        *slot = Some((line, roi));
    }
    let missing = |class: u8| err(0, format!("missing class {class} record"));
    Ok(RoiPair {
        iris_roi: slots[0].ok_or_else(|| missing(IRIS_CLASS))?.1,
        sclera_roi: slots[1].ok_or_else(|| missing(SCLERA_CLASS))?.1,
        confidence: 1.0,
    })
}

pub fn load_sidecar_boxes(path: impl AsRef<Path>, width: usize, height: usize) -> Result<RoiPair> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sidecar(&text, path, width, height)
}

/// Minimum pixel count for a dark blob to count as an iris.
pub const MIN_BLOB_PIXELS: usize = 50;

fn touches_border(
    (x0, y0, x1, y1): (usize, usize, usize, usize),
    width: usize,
    height: usize,
) -> bool {
    x0 == 0 || y0 == 0 || x1 + 1 == width || y1 + 1 == height
}

/// Classical fallback detector: largest dark blob under a full-frame
/// adaptive threshold. Blobs touching the frame edge are skipped (shadowed
/// background, not an iris). The iris box is the blob's bounding box grown
/// by 20 %, the sclera box the same box grown 3x.
pub fn intensity_roi(img: &GrayImage) -> Result<RoiPair> {
    if img.width() < 64 || img.height() < 64 {
        return Err(Error::InvalidParameter(format!(
            "intensity detector needs at least 64x64, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let mask = adaptive_threshold(img, &Roi::full(img), DEFAULT_K)?;
    let blob = connected_dark_components(&mask)
        .into_iter()
        .filter(|c| {
            c.len() >= MIN_BLOB_PIXELS && !touches_border(c.bbox(), img.width(), img.height())
        })
        .max_by_key(|c| c.len())
        .ok_or_else(|| {
            Error::Detection(format!("no dark blob of at least {MIN_BLOB_PIXELS} pixels"))
        })?;
    let (x0, y0, x1, y1) = blob.bbox();
    // Extent through the outer pixel edges.
    let (bx0, by0, bx1, by1) = (
        x0 as f64 - 0.5,
        y0 as f64 - 0.5,
        x1 as f64 + 0.5,
        y1 as f64 + 0.5,
    );
    let (cx, cy) = ((bx0 + bx1) / 2.0, (by0 + by1) / 2.0);
    let (hw, hh) = ((bx1 - bx0) / 2.0, (by1 - by0) / 2.0);
    let (w, h) = img.dims();
    let grow = |s: f64| {
        Roi::from_extent(
            cx - hw * s + 0.5,
            cy - hh * s + 0.5,
            cx + hw * s + 0.5,
            cy + hh * s + 0.5,
            w,
            h,
        )
    };
    Ok(RoiPair {
        iris_roi: grow(1.2)?,
        sclera_roi: grow(3.0)?,
        confidence: blob.len() as f64 / ((bx1 - bx0) * (by1 - by0)),
    })
}
