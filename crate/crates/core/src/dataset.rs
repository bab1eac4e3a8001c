//! On-disk synthetic sweeps: `manifest.json` plus, per frame, a PNG, a JSON
//! ground-truth record and a sidecar box file sharing the same stem.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::roi::{oracle_roi, write_sidecar};
use crate::synth::{generate_sweep, render_frame, EyeScene, FrameMeta, SweepSpec};
use crate::track::GroundTruth;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub index: usize,
    pub angle_deg: f64,
    pub image: String,
    pub meta: String,
    pub sidecar: String,
}

impl ManifestFrame {
    pub fn stem(&self) -> &str {
        self.image.strip_suffix(".png").unwrap_or(&self.image)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
    pub sweep: SweepSpec,
    pub template: EyeScene,
    /// Margin used for the oracle sidecar boxes.
    pub roi_margin: f64,
    pub frames: Vec<ManifestFrame>,
}

pub fn frame_stem(index: usize) -> String {
    format!("frame_{index:04}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Renders a sweep into `dir` (created if needed). Frames render in parallel;
/// output is identical regardless of thread count.
pub fn write_dataset(
    dir: impl AsRef<Path>,
    spec: &SweepSpec,
    template: &EyeScene,
    roi_margin: f64,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let poses = generate_sweep(spec, template)?;
    let frames = poses
        .par_iter()
        .map(|pose| {
            let frame = render_frame(&pose.scene, &spec.intrinsics, spec.width, spec.height)?;
            let rois = oracle_roi(
                &pose.scene,
                &spec.intrinsics,
                roi_margin,
                spec.width,
                spec.height,
            )?;
            let stem = frame_stem(pose.index);
            let entry = ManifestFrame {
                index: pose.index,
                angle_deg: pose.angle_deg,
                image: format!("{stem}.png"),
                meta: format!("{stem}.json"),
                sidecar: format!("{stem}.txt"),
            };
            frame.image.save(dir.join(&entry.image))?;
            write_json(&dir.join(&entry.meta), &frame.meta)?;
            write_sidecar(dir.join(&entry.sidecar), &rois, spec.width, spec.height)?;
            Ok(entry)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        version: FORMAT_VERSION,
        width: spec.width,
        height: spec.height,
        intrinsics: spec.intrinsics,
        sweep: spec.clone(),
        template: template.clone(),
        roi_margin,
        frames,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// A dataset directory and its parsed manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
        if manifest.version != FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported dataset version {} (expected {FORMAT_VERSION})",
                manifest.version
            )));
        }
        Ok(Self { dir, manifest })
    }

    pub fn image_path(&self, frame: &ManifestFrame) -> PathBuf {
        self.dir.join(&frame.image)
    }

    pub fn sidecar_path(&self, frame: &ManifestFrame) -> PathBuf {
        self.dir.join(&frame.sidecar)
    }

    pub fn meta_path(&self, frame: &ManifestFrame) -> PathBuf {
        self.dir.join(&frame.meta)
    }

    pub fn load_meta(&self, frame: &ManifestFrame) -> Result<FrameMeta> {
        load_meta(self.meta_path(frame))
    }
}

pub fn load_meta(path: impl AsRef<Path>) -> Result<FrameMeta> {
    read_json(path.as_ref())
}

impl From<&FrameMeta> for GroundTruth {
    fn from(meta: &FrameMeta) -> Self {
        GroundTruth {
            center_px: meta.iris_center_px,
            normal: Some(meta.normal_gaze),
        }
    }
}
