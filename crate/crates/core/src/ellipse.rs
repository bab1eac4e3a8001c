//! Ellipse parameterisation, direct least-squares conic fitting and RANSAC.
//!
//! The direct fit is the ellipse-specific least-squares estimator of
//! Fitzgibbon, Pilu and Fisher in the numerically stable block form of
//! Halíř and Flusser, run on centred and scaled coordinates.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Point2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Image-plane ellipse. Axis lengths are FULL lengths (twice the semi-axes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    /// Full major axis length, pixels.
    pub major: f64,
    /// Full minor axis length, pixels.
    pub minor: f64,
    /// Direction of the major axis from the image x-axis, in `[0, π)`.
    pub psi: f64,
}

fn wrap_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(PI);
    if a >= PI {
        0.0
    } else {
        a
    }
}

impl Ellipse {
    /// Normalises so that `major >= minor` and `psi ∈ [0, π)`.
    pub fn new(cx: f64, cy: f64, axis_a: f64, axis_b: f64, angle_a: f64) -> Self {
        let (major, minor, psi) = if axis_a >= axis_b {
            (axis_a, axis_b, angle_a)
        } else {
            (axis_b, axis_a, angle_a + PI / 2.0)
        };
        Self {
            cx,
            cy,
            major,
            minor,
            psi: wrap_pi(psi),
        }
    }

    pub fn circle(cx: f64, cy: f64, radius: f64) -> Self {
        Self::new(cx, cy, 2.0 * radius, 2.0 * radius, 0.0)
    }

    pub fn center(&self) -> Point2<f64> {
        Point2::new(self.cx, self.cy)
    }

    pub fn semi_major(&self) -> f64 {
        self.major / 2.0
    }

    pub fn semi_minor(&self) -> f64 {
        self.minor / 2.0
    }

    pub fn area(&self) -> f64 {
        PI * self.semi_major() * self.semi_minor()
    }

    pub fn is_valid(&self) -> bool {
        self.minor > 0.0
            && self.major >= self.minor
            && (0.0..PI).contains(&self.psi)
            && self.cx.is_finite()
            && self.cy.is_finite()
    }

    /// Point at parameter `t` on the curve.
    pub fn point_at(&self, t: f64) -> Point2<f64> {
        let (s, c) = self.psi.sin_cos();
        let (u, v) = (self.semi_major() * t.cos(), self.semi_minor() * t.sin());
        Point2::new(self.cx + c * u - s * v, self.cy + s * u + c * v)
    }

    /// `n` points evenly spaced in the parameter.
    pub fn sample(&self, n: usize) -> Vec<Point2<f64>> {
        (0..n)
            .map(|i| self.point_at(2.0 * PI * i as f64 / n as f64))
            .collect()
    }

    /// Coordinates of `q` in the ellipse's own frame (major axis along u).
    fn local(&self, q: &Point2<f64>) -> (f64, f64) {
        let (s, c) = self.psi.sin_cos();
        let (dx, dy) = (q.x - self.cx, q.y - self.cy);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// `true` when `q` lies strictly inside.
    pub fn contains(&self, q: &Point2<f64>) -> bool {
        let (u, v) = self.local(q);
        (u / self.semi_major()).powi(2) + (v / self.semi_minor()).powi(2) < 1.0
    }

    /// Half-extents of the axis-aligned bounding box.
    pub fn half_extents(&self) -> (f64, f64) {
        let (s, c) = self.psi.sin_cos();
        let (a, b) = (self.semi_major(), self.semi_minor());
        (
            (a * a * c * c + b * b * s * s).sqrt(),
            (a * a * s * s + b * b * c * c).sqrt(),
        )
    }

    /// `(xmin, ymin, xmax, ymax)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let (hx, hy) = self.half_extents();
        (self.cx - hx, self.cy - hy, self.cx + hx, self.cy + hy)
    }

    pub fn to_conic(&self) -> Conic {
        let (s, c) = self.psi.sin_cos();
        // Rows map homogeneous image points into the ellipse frame.
        let h = Matrix3::new(
            c,
            s,
            -(c * self.cx + s * self.cy),
            -s,
            c,
            s * self.cx - c * self.cy,
            0.0,
            0.0,
            1.0,
        );
        let a2 = self.semi_major().powi(2);
        let b2 = self.semi_minor().powi(2);
        let d = Matrix3::from_diagonal(&Vector3::new(1.0 / a2, 1.0 / b2, -1.0));
        Conic::from_matrix(h.transpose() * d * h)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }
}

/// Symmetric 3x3 conic matrix `Q`; points satisfy `[x y 1] Q [x y 1]^T = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conic {
    pub m: Matrix3<f64>,
}

impl Conic {
    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        Self {
            m: (m + m.transpose()) * 0.5,
        }
    }

    /// From `A x² + B xy + C y² + D x + E y + F`.
    pub fn from_coeffs([a, b, c, d, e, f]: [f64; 6]) -> Self {
        Self::from_matrix(Matrix3::new(
            a,
            b / 2.0,
            d / 2.0,
            b / 2.0,
            c,
            e / 2.0,
            d / 2.0,
            e / 2.0,
            f,
        ))
    }

    pub fn coeffs(&self) -> [f64; 6] {
        let m = &self.m;
        [
            m[(0, 0)],
            2.0 * m[(0, 1)],
            m[(1, 1)],
            2.0 * m[(0, 2)],
            2.0 * m[(1, 2)],
            m[(2, 2)],
        ]
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let p = Vector3::new(x, y, 1.0);
        p.dot(&(self.m * p))
    }

    /// Converts to centre/axes/angle. Fails for hyperbolas, parabolas and
    /// imaginary or degenerate ellipses.
    pub fn to_ellipse(&self) -> Result<Ellipse> {
        let [a, b, c, d, e, f] = self.coeffs();
        let det2 = a * c - b * b / 4.0;
        let scale = a.abs().max(c.abs()).max(b.abs());
        if !(det2 > 1e-14 * scale * scale) {
            return Err(Error::FitFailure("conic is not an ellipse".into()));
        }
        let cx = (b * e / 4.0 - c * d / 2.0) / det2;
        let cy = (b * d / 4.0 - a * e / 2.0) / det2;
        let f0 = f + (d * cx + e * cy) / 2.0;

        let mean = (a + c) / 2.0;
        let rad = (((a - c) / 2.0).powi(2) + (b / 2.0).powi(2)).sqrt();
        let (l_big, l_small) = (mean + rad, mean - rad);
        let sa2 = -f0 / l_small;
        let sb2 = -f0 / l_big;
        if !(sa2 > 0.0 && sb2 > 0.0 && sa2.is_finite() && sb2.is_finite()) {
            return Err(Error::FitFailure("conic has no real points".into()));
        }
        // Eigenvector of the larger eigenvalue lies along the minor axis.
        let minor_dir = 0.5 * b.atan2(a - c);
        let flip = l_small < 0.0;
        let (major, minor, psi) = if flip {
            // Both eigenvalues negative: the larger magnitude is `l_small`.
            (2.0 * sb2.sqrt(), 2.0 * sa2.sqrt(), minor_dir)
        } else {
            (2.0 * sa2.sqrt(), 2.0 * sb2.sqrt(), minor_dir + PI / 2.0)
        };
        Ok(Ellipse::new(cx, cy, major, minor, psi))
    }
}

/// Exact Euclidean distance from `q` to the ellipse curve.
///
/// Robust bisection on the foot-point equation (Eberly). Zero on the curve,
/// exact for circles, positive both inside and outside.
pub fn point_ellipse_distance(e: &Ellipse, q: &Point2<f64>) -> f64 {
    let (u, v) = e.local(q);
    distance_first_quadrant(e.semi_major(), e.semi_minor(), u.abs(), v.abs())
}

fn distance_first_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1).powi(2);
            let sbar = foot_root(r0, z0, z1, g);
            let x0 = r0 * y0 / (sbar + r0);
            let x1 = y1 / (sbar + 1.0);
            (x0 - y0).hypot(x1 - y1)
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}

fn foot_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Result of a direct fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseFit {
    pub ellipse: Ellipse,
    /// RMS geometric distance of the input points to the fitted curve.
    pub rms: f64,
}

pub const MIN_FIT_POINTS: usize = 6;

fn rms_distance(e: &Ellipse, points: &[Point2<f64>]) -> f64 {
    let ss: f64 = points
        .iter()
        .map(|p| point_ellipse_distance(e, p).powi(2))
        .sum();
    (ss / points.len() as f64).sqrt()
}

/// Ellipse-constrained algebraic least-squares fit.
pub fn fit_ellipse_direct(points: &[Point2<f64>]) -> Result<EllipseFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_FIT_POINTS,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x / n, sy + p.y / n));
    let spread = (points
        .iter()
        .map(|p| (p.x - mx).powi(2) + (p.y - my).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !(spread > 0.0) {
        return Err(Error::FitFailure("points are coincident".into()));
    }
    let s = 1.0 / spread;

    let mut s1 = Matrix3::zeros();
    let mut s2 = Matrix3::zeros();
    let mut s3 = Matrix3::zeros();
    for p in points {
        let (x, y) = ((p.x - mx) * s, (p.y - my) * s);
        let quad = Vector3::new(x * x, x * y, y * y);
        let lin = Vector3::new(x, y, 1.0);
        s1 += quad * quad.transpose();
        s2 += quad * lin.transpose();
        s3 += lin * lin.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| Error::FitFailure("points are collinear".into()))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // Premultiply by the inverse of the 4ac - b² constraint block.
    let reduced = Matrix3::from_rows(&[m.row(2) / 2.0, -m.row(1), m.row(0) / 2.0]);

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in real_eigenvalues(&reduced) {
        let Some(vec) = null_vector(&(reduced - Matrix3::identity() * lambda)) else {
            continue;
        };
        let constraint = 4.0 * vec[0] * vec[2] - vec[1] * vec[1];
        if constraint <= 0.0 {
            continue;
        }
        // Algebraic cost per unit constraint; smallest wins.
        let cost = (vec.transpose() * m * vec)[0] / constraint;
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, vec));
        }
    }
    let (_, quad) = best.ok_or_else(|| Error::FitFailure("no elliptical solution".into()))?;
    let lin = t * quad;
    let local = Conic::from_coeffs([quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]]);
    let h = Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0);
    let conic = Conic::from_matrix(h.transpose() * local.m * h);
    let ellipse = conic.to_ellipse()?;
    Ok(EllipseFit {
        rms: rms_distance(&ellipse, points),
        ellipse,
    })
}

fn real_eigenvalues(m: &Matrix3<f64>) -> Vec<f64> {
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    m.complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * scale)
        .map(|z| z.re)
        .collect()
}

/// Unit vector spanning the (numerical) null space of a rank-2 matrix.
fn null_vector(a: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [
        a.row(0).transpose(),
        a.row(1).transpose(),
        a.row(2).transpose(),
    ];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let v = candidates
        .into_iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))?;
    let norm = v.norm();
    (norm > 0.0 && norm.is_finite()).then(|| v / norm)
}

/// RANSAC parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Geometric point-to-curve distance accepted as inlier, pixels.
    pub inlier_tol: f64,
    pub min_inlier_frac: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_tol: 1.5,
            min_inlier_frac: 0.5,
            seed: 42,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "RANSAC needs at least one iteration".into(),
            ));
        }
        if !(self.inlier_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "inlier tolerance must be positive".into(),
            ));
        }
        if !(self.min_inlier_frac > 0.0 && self.min_inlier_frac <= 1.0) {
            return Err(Error::InvalidParameter(
                "min inlier fraction must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    pub ellipse: Ellipse,
    /// Indices into the input of the winning model's inliers, ascending.
    pub inliers: Vec<usize>,
    /// RMS distance of the inliers to the refitted ellipse.
    pub rms: f64,
}

/// Six-point RANSAC around [`fit_ellipse_direct`], refit on the best
/// consensus set. Deterministic for a given seed.
pub fn ransac_fit_ellipse(points: &[Point2<f64>], cfg: &RansacConfig) -> Result<RansacFit> {
    cfg.validate()?;
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_FIT_POINTS,
            got: points.len(),
        });
    }
    let needed = ((cfg.min_inlier_frac * points.len() as f64).ceil() as usize).max(MIN_FIT_POINTS);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sample = Vec::with_capacity(MIN_FIT_POINTS);
    // (inlier count, rms, inliers)
    let mut best: Option<(usize, f64, Vec<usize>)> = None;

    for _ in 0..cfg.iterations {
        let idx = rand::seq::index::sample(&mut rng, points.len(), MIN_FIT_POINTS);
        sample.clear();
        sample.extend(idx.iter().map(|i| points[i]));
        let Ok(model) = fit_ellipse_direct(&sample) else {
            continue;
        };
        let mut inliers = Vec::new();
        let mut ss = 0.0;
        for (i, p) in points.iter().enumerate() {
            let d = point_ellipse_distance(&model.ellipse, p);
            if d <= cfg.inlier_tol {
                inliers.push(i);
                ss += d * d;
            }
        }
        let rms = (ss / inliers.len().max(1) as f64).sqrt();
        let better = match &best {
            None => true,
            Some((count, best_rms, _)) => {
                inliers.len() > *count || (inliers.len() == *count && rms < *best_rms)
            }
        };
        if better {
            best = Some((inliers.len(), rms, inliers));
        }
    }

    let (count, _, inliers) = best.unwrap_or((0, 0.0, Vec::new()));
    if count < needed {
        return Err(Error::RobustFitFailure {
            best: count,
            needed,
        });
    }
    let consensus: Vec<Point2<f64>> = inliers.iter().map(|&i| points[i]).collect();
    let refit = fit_ellipse_direct(&consensus)?;
    Ok(RansacFit {
        ellipse: refit.ellipse,
        rms: refit.rms,
        inliers,
    })
}
