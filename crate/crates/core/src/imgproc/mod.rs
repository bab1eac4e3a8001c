//! Region-scoped binarisation, border extraction and hull selection.
//!
//! A frame plus an iris window goes in; the vertices of the largest dark
//! convex hull come out. Masks and point lists produced here are in
//! ROI-local coordinates; [`HullCandidate::to_image`] adds the window offset.

mod hull;
mod raster;

use std::collections::VecDeque;

use nalgebra::Point2;

pub use hull::{convex_hull, polygon_area};
pub use raster::{luma, BinaryMask, GrayImage, Roi};

use crate::error::{Error, Result};

/// Default scale factor applied to the region mean.
pub const DEFAULT_K: f64 = 0.7;

/// Binarisation rule. `Adaptive` is `thd = mean(roi) * k`; `Fixed` ignores
/// the region statistics (kept for the ablation comparison).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Threshold {
    Adaptive { k: f64 },
    Fixed(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Adaptive { k: DEFAULT_K }
    }
}

/// Mean intensity over the window, in real arithmetic.
pub fn roi_mean(img: &GrayImage, roi: &Roi) -> Result<f64> {
    roi.check_within(img.width(), img.height())?;
    let mut sum: u64 = 0;
    for y in roi.y0..roi.y1() {
        sum += img.row(y)[roi.x0..roi.x1()]
            .iter()
            .map(|&v| v as u64)
            .sum::<u64>();
    }
    Ok(sum as f64 / (roi.w * roi.h) as f64)
}

/// Marks pixels strictly darker than `mean(roi) * k`.
pub fn adaptive_threshold(img: &GrayImage, roi: &Roi, k: f64) -> Result<BinaryMask> {
    binarize(img, roi, Threshold::Adaptive { k })
}

pub fn binarize(img: &GrayImage, roi: &Roi, rule: Threshold) -> Result<BinaryMask> {
    roi.check_within(img.width(), img.height())?;
    let thd = match rule {
        Threshold::Adaptive { k } => {
            if !(k > 0.0 && k < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "threshold scale k={k} outside (0, 1)"
                )));
            }
            roi_mean(img, roi)? * k
        }
        Threshold::Fixed(t) => t,
    };
    Ok(BinaryMask::from_fn(roi.w, roi.h, |x, y| {
        (img.get(roi.x0 + x, roi.y0 + y) as f64) < thd
    }))
}

const NEIGHBOURS_4: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

#[inline]
fn is_border(mask: &BinaryMask, x: usize, y: usize) -> bool {
    let (x, y) = (x as isize, y as isize);
    NEIGHBOURS_4
        .iter()
        .any(|(dx, dy)| !mask.is_dark_signed(x + dx, y + dy))
}

/// Dark pixels with at least one bright 4-neighbour; outside the mask counts
/// as bright. Row-major order.
pub fn extract_border_points(mask: &BinaryMask) -> Vec<Point2<f64>> {
    let mut out = Vec::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.is_dark(x, y) && is_border(mask, x, y) {
                out.push(Point2::new(x as f64, y as f64));
            }
        }
    }
    out
}

/// A 4-connected set of dark pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// First pixel reached in row-major scan (top-most, then left-most).
    pub seed: (usize, usize),
    pub pixels: Vec<(usize, usize)>,
}

impl Component {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn border_points(&self, mask: &BinaryMask) -> Vec<Point2<f64>> {
        self.pixels
            .iter()
            .filter(|&&(x, y)| is_border(mask, x, y))
            .map(|&(x, y)| Point2::new(x as f64, y as f64))
            .collect()
    }

    /// Inclusive pixel bounding box `(xmin, ymin, xmax, ymax)`.
    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        self.pixels.iter().fold(
            (usize::MAX, usize::MAX, 0, 0),
            |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }
}

/// 4-connected components of dark pixels, ordered by seed.
pub fn connected_dark_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.is_dark(x, y) || seen[y * w + x] {
                continue;
            }
            seen[y * w + x] = true;
            queue.push_back((x, y));
            let mut pixels = Vec::new();
            while let Some((cx, cy)) = queue.pop_front() {
                pixels.push((cx, cy));
                for (dx, dy) in NEIGHBOURS_4 {
                    let (nx, ny) = (cx as isize + dx, cy as isize + dy);
                    if mask.is_dark_signed(nx, ny) {
                        let idx = ny as usize * w + nx as usize;
                        if !seen[idx] {
                            seen[idx] = true;
                            queue.push_back((nx as usize, ny as usize));
                        }
                    }
                }
            }
            pixels.sort_unstable_by_key(|&(px, py)| (py, px));
            out.push(Component {
                seed: (x, y),
                pixels,
            });
        }
    }
    out
}

/// Convex hull of one dark component.
#[derive(Debug, Clone, PartialEq)]
pub struct HullCandidate {
    /// Counter-clockwise hull vertices, ROI-local.
    pub vertices: Vec<Point2<f64>>,
    pub area: f64,
    pub pixel_count: usize,
    pub seed: (usize, usize),
}

impl HullCandidate {
    /// Vertices shifted into full-image coordinates.
    pub fn to_image(&self, roi: &Roi) -> Vec<Point2<f64>> {
        let offset = nalgebra::Vector2::new(roi.x0 as f64, roi.y0 as f64);
        self.vertices.iter().map(|p| p + offset).collect()
    }
}

/// Hulls every component and keeps the largest by area. Ties go to the
/// larger component, then to the earlier seed.
pub fn select_largest_hull(mask: &BinaryMask) -> Result<HullCandidate> {
    let mut best: Option<HullCandidate> = None;
    for comp in connected_dark_components(mask) {
        let border = comp.border_points(mask);
        let Ok(vertices) = convex_hull(&border) else {
            continue;
        };
        let cand = HullCandidate {
            area: polygon_area(&vertices),
            vertices,
            pixel_count: comp.len(),
            seed: comp.seed,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                cand.area > b.area || (cand.area == b.area && cand.pixel_count > b.pixel_count)
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| {
        Error::DegenerateGeometry("no dark component spans a non-degenerate hull".into())
    })
}
