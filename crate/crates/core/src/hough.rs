//! Accumulator-voting shape detection: an ellipse centered on the pupil for
//! the iris/sclera boundary and focus-anchored parabolas for the eyelids.
//!
//! Eyelids use the polar parabola `r = d / (1 + cos t)` with its focus on the
//! pupil center, so an eyelid is fully described by `d` and the tilt of its
//! axis. Every edge point votes `d = |p| + p.w` for each sampled tilt, where
//! `w` is the unit vector from the focus towards the vertex.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{EdgeMap, EdgePoint, GrayImage};
use crate::segmentation::PupilCircle;

/// One accumulator axis: `bins` cells of width `bin_width` starting at `min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub bin_width: f64,
    pub bins: usize,
}

impl AxisSpec {
    /// Covers `[min, max]` with cells of `bin_width`.
    pub fn covering(min: f64, max: f64, bin_width: f64) -> Self {
        let bins = (((max - min) / bin_width).ceil() as usize).max(1);
        Self {
            min,
            bin_width,
            bins,
        }
    }

    pub fn index(&self, value: f64) -> Option<usize> {
        let pos = (value - self.min) / self.bin_width;
        if pos >= 0.0 && pos < self.bins as f64 {
            Some(pos as usize)
        } else {
            None
        }
    }

    pub fn center(&self, index: usize) -> f64 {
        self.min + (index as f64 + 0.5) * self.bin_width
    }
}

/// Dense vote grid over two or three axes, row-major with the last axis
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    axes: Vec<AxisSpec>,
    cells: Vec<u32>,
    votes: u64,
}

impl Accumulator {
    pub fn new(axes: Vec<AxisSpec>) -> Self {
        assert!((2..=3).contains(&axes.len()), "accumulators are 2D or 3D");
        let size = axes.iter().map(|a| a.bins).product();
        Self {
            axes,
            cells: vec![0; size],
            votes: 0,
        }
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    /// Total number of votes cast.
    pub fn votes(&self) -> u64 {
        self.votes
    }

    pub fn flat_index(&self, coords: &[f64]) -> Option<usize> {
        debug_assert_eq!(coords.len(), self.axes.len());
        let mut flat = 0;
        for (axis, &v) in self.axes.iter().zip(coords) {
            flat = flat * axis.bins + axis.index(v)?;
        }
        Some(flat)
    }

    /// Adds one vote; returns false when the coordinates fall outside the grid.
    pub fn vote(&mut self, coords: &[f64]) -> bool {
        match self.flat_index(coords) {
            Some(i) => {
                self.cells[i] += 1;
                self.votes += 1;
                true
            }
            None => false,
        }
    }

    pub fn merge(mut self, other: &Accumulator) -> Self {
        assert_eq!(self.axes, other.axes);
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        self.votes += other.votes;
        self
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            idx[k] = flat % axis.bins;
            flat /= axis.bins;
        }
        idx
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .into_iter()
            .zip(&self.axes)
            .map(|(i, axis)| axis.center(i))
            .collect()
    }

    /// Heat map of a 2D accumulator, first axis along rows, scaled to the peak.
    pub fn to_heatmap(&self) -> GrayImage {
        let (rows, cols) = (self.axes[0].bins, self.cells.len() / self.axes[0].bins);
        let peak = self.cells.iter().copied().max().unwrap_or(0).max(1) as f64;
        let data = self
            .cells
            .iter()
            .map(|&c| (255.0 * c as f64 / peak).round() as u8)
            .collect();
        GrayImage::from_vec(cols, rows, data).expect("accumulator has cells")
    }
}

/// Flat index of the maximal cell, if its count reaches `threshold`. Ties
/// resolve to the lowest flat index.
pub fn accumulator_peak(acc: &Accumulator, threshold: u32) -> Result<usize> {
    let mut best = (0usize, 0u32);
    for (i, &c) in acc.cells.iter().enumerate() {
        if c > best.1 {
            best = (i, c);
        }
    }
    if best.1 == 0 || best.1 < threshold {
        return Err(Error::NotFound {
            votes: best.1,
            threshold,
        });
    }
    Ok(best.0)
}

/// Iris outer boundary: semi-axes `a` (along x) and `b` (along y) about the
/// pupil center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseParams {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
}

impl EllipseParams {
    /// Value of `(dx/a)^2 + (dy/b)^2`; 1 on the boundary.
    pub fn level(&self, x: f64, y: f64) -> f64 {
        let (u, v) = ((x - self.cx) / self.a, (y - self.cy) / self.b);
        u * u + v * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseConfig {
    pub theta_samples: usize,
    /// Minimum `|cos t|` and `|sin t|` for a sweep angle to vote.
    pub epsilon: f64,
    pub bin_width: f64,
    /// Peak threshold as a fraction of the smallest admissible perimeter.
    pub vote_fraction: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl Default for EllipseConfig {
    fn default() -> Self {
        Self {
            theta_samples: 360,
            epsilon: 0.05,
            bin_width: 1.0,
            vote_fraction: 0.25,
            min_ratio: 1.2,
            max_ratio: 2.4,
        }
    }
}

impl EllipseConfig {
    pub fn vote_threshold(&self, pupil: &PupilCircle) -> u32 {
        let perimeter = 2.0 * PI * self.min_ratio * pupil.radius;
        (self.vote_fraction * perimeter).ceil() as u32
    }

    fn axis(&self, pupil: &PupilCircle) -> AxisSpec {
        AxisSpec::covering(
            self.min_ratio * pupil.radius,
            self.max_ratio * pupil.radius,
            self.bin_width,
        )
    }

    fn sweep(&self) -> Vec<(f64, f64)> {
        (0..self.theta_samples)
            .map(|k| 2.0 * PI * k as f64 / self.theta_samples as f64)
            .map(|t| (t.cos(), t.sin()))
            .filter(|(c, s)| c.abs() >= self.epsilon && s.abs() >= self.epsilon)
            .collect()
    }
}

/// Edge points whose distance from the pupil center lies within the search
/// annulus.
pub fn annulus_points(edges: &EdgeMap, pupil: &PupilCircle, cfg: &EllipseConfig) -> Vec<EdgePoint> {
    let (lo, hi) = (cfg.min_ratio * pupil.radius, cfg.max_ratio * pupil.radius);
    edges
        .points
        .iter()
        .copied()
        .filter(|p| {
            let r = (p.x as f64 - pupil.cx).hypot(p.y as f64 - pupil.cy);
            r >= lo && r <= hi
        })
        .collect()
}

/// Votes every annulus edge point into the `(a, b)` plane.
pub fn elliptic_accumulator(edges: &EdgeMap, pupil: &PupilCircle, cfg: &EllipseConfig) -> Result<Accumulator> {
    let points = annulus_points(edges, pupil, cfg);
    if points.is_empty() {
        return Err(Error::EmptyAnnulus);
    }
    let axis = cfg.axis(pupil);
    let (lo, hi) = (cfg.min_ratio * pupil.radius, cfg.max_ratio * pupil.radius);
    let sweep = cfg.sweep();
    let empty = Accumulator::new(vec![axis, axis]);
    let acc = points
        .par_chunks(256)
        .fold(
            || empty.clone(),
            |mut acc, chunk| {
                for p in chunk {
                    let (dx, dy) = (p.x as f64 - pupil.cx, p.y as f64 - pupil.cy);
                    for &(c, s) in &sweep {
                        let (a, b) = (dx / c, dy / s);
                        if a >= lo && a <= hi && b >= lo && b <= hi {
                            acc.vote(&[a, b]);
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| empty.clone(), |a, b| a.merge(&b));
    Ok(acc)
}

pub fn elliptic_hough(edges: &EdgeMap, pupil: &PupilCircle, cfg: &EllipseConfig) -> Result<EllipseParams> {
    let acc = elliptic_accumulator(edges, pupil, cfg)?;
    ellipse_from_accumulator(&acc, pupil, cfg)
}

pub fn ellipse_from_accumulator(acc: &Accumulator, pupil: &PupilCircle, cfg: &EllipseConfig) -> Result<EllipseParams> {
    let threshold = cfg.vote_threshold(pupil);
    let peak = accumulator_peak(acc, threshold).map_err(|e| match e {
        Error::NotFound { votes, threshold } => Error::NoEllipseFound { votes, threshold },
        other => other,
    })?;
    let center = acc.cell_center(peak);
    let (lo, hi) = (cfg.min_ratio * pupil.radius, cfg.max_ratio * pupil.radius);
    Ok(EllipseParams {
        cx: pupil.cx,
        cy: pupil.cy,
        a: center[0].clamp(lo, hi),
        b: center[1].clamp(lo, hi),
    })
}

/// Radial distance from `(x, y)` to the ellipse boundary along the ray
/// from its center.
pub fn distance_to_ellipse(e: &EllipseParams, x: f64, y: f64) -> f64 {
    let (dx, dy) = (x - e.cx, y - e.cy);
    let rho = dx.hypot(dy);
    if rho == 0.0 {
        return e.a.min(e.b);
    }
    let (c, s) = (dx / rho, dy / rho);
    let boundary = 1.0 / ((c / e.a).powi(2) + (s / e.b).powi(2)).sqrt();
    (rho - boundary).abs()
}

/// Fewest inliers a least-squares refinement will accept.
pub const MIN_REFINE_POINTS: usize = 20;

/// Least-squares polish of a Hough ellipse: the edge points within `band`
/// pixels of it are fitted by `x^2 / a^2 + y^2 / b^2 = 1` about the same
/// center, repeated so the inlier set can follow the fit. Returns the
/// input unchanged when too few points support it.
pub fn refine_ellipse(edges: &[EdgePoint], initial: &EllipseParams, band: f64) -> EllipseParams {
    let mut e = *initial;
    for _ in 0..3 {
        let (mut sxx, mut sxy, mut syy, mut sx, mut sy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0usize);
        for p in edges {
            let (x, y) = (p.x as f64, p.y as f64);
            if distance_to_ellipse(&e, x, y) > band {
                continue;
            }
            let (u, v) = ((x - e.cx).powi(2), (y - e.cy).powi(2));
            sxx += u * u;
            sxy += u * v;
            syy += v * v;
            sx += u;
            sy += v;
            n += 1;
        }
        let det = sxx * syy - sxy * sxy;
        if n < MIN_REFINE_POINTS || det.abs() < 1e-12 * sxx * syy {
            return e;
        }
        let (ia, ib) = ((sx * syy - sy * sxy) / det, (sy * sxx - sx * sxy) / det);
        if !(ia > 0.0 && ib > 0.0) {
            return e;
        }
        let next = EllipseParams {
            a: 1.0 / ia.sqrt(),
            b: 1.0 / ib.sqrt(),
            ..e
        };
        // a fit that leaves the band it was drawn from is not trusted
        if (next.a - initial.a).abs() > 2.0 * band || (next.b - initial.b).abs() > 2.0 * band {
            return e;
        }
        e = next;
    }
    e
}

/// `y = a x^2 + b x + c` in image coordinates (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }
}

/// Least-squares quadratic through `points`; exact for three distinct
/// abscissae. `None` when the system is singular.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Option<Quadratic> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let scale = points
        .iter()
        .map(|p| (p.0 - mean).abs())
        .fold(0.0, f64::max)
        .max(1e-12);
    // normal equations in u = (x - mean) / scale
    let mut m = [[0.0f64; 4]; 3];
    for &(x, y) in points {
        let u = (x - mean) / scale;
        let basis = [u * u, u, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            m[i][3] += basis[i] * y;
        }
    }
    let [p, q, r] = solve3(m)?;
    // y = p u^2 + q u + r with u = (x - mean)/scale
    let (s2, mean2) = (scale * scale, mean * mean);
    Some(Quadratic {
        a: p / s2,
        b: q / scale - 2.0 * p * mean / s2,
        c: p * mean2 / s2 - q * mean / scale + r,
    })
}

fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eyelid {
    Upper,
    Lower,
}

impl Eyelid {
    /// Unit vector from the focus towards the vertex for an axis tilted by
    /// `tilt` radians from the image vertical.
    pub fn vertex_direction(self, tilt: f64) -> (f64, f64) {
        let (s, c) = tilt.sin_cos();
        match self {
            Eyelid::Upper => (s, -c),
            Eyelid::Lower => (-s, c),
        }
    }
}

/// Parabola with semi-latus rectum `d`; `theta_axis` is the direction from
/// the vertex towards the focus, so an upper eyelid (opening downward on
/// screen) has `theta_axis` near `+pi/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolaParams {
    pub d: f64,
    pub theta_axis: f64,
    pub vertex: (f64, f64),
    pub focus: (f64, f64),
    pub quad: Quadratic,
}

impl ParabolaParams {
    pub fn from_vertex(d: f64, theta_axis: f64, vertex: (f64, f64)) -> Result<Self> {
        let quad = convert_parabola(d, theta_axis, vertex)?;
        let (ux, uy) = (theta_axis.cos(), theta_axis.sin());
        Ok(Self {
            d,
            theta_axis,
            vertex,
            focus: (vertex.0 + 0.5 * d * ux, vertex.1 + 0.5 * d * uy),
            quad,
        })
    }

    pub fn from_focus(d: f64, theta_axis: f64, focus: (f64, f64)) -> Result<Self> {
        let (ux, uy) = (theta_axis.cos(), theta_axis.sin());
        Self::from_vertex(d, theta_axis, (focus.0 - 0.5 * d * ux, focus.1 - 0.5 * d * uy))
    }

    /// Eyelid parabola with its focus on the pupil center.
    pub fn eyelid(lid: Eyelid, d: f64, tilt: f64, focus: (f64, f64)) -> Result<Self> {
        let (wx, wy) = lid.vertex_direction(tilt);
        Self::from_focus(d, (-wy).atan2(-wx), focus)
    }

    /// Tilt of the axis away from the image vertical.
    pub fn tilt(&self) -> f64 {
        let t = self.theta_axis - PI / 2.0;
        // fold into (-pi/2, pi/2]
        let mut t = t.rem_euclid(PI);
        if t > PI / 2.0 {
            t -= PI;
        }
        t
    }

    /// `|p - f| + (p - f).w - d`: negative on the focus side of the curve,
    /// zero on it, positive beyond it.
    pub fn side(&self, x: f64, y: f64) -> f64 {
        let (px, py) = (x - self.focus.0, y - self.focus.1);
        let (wx, wy) = (-self.theta_axis.cos(), -self.theta_axis.sin());
        px.hypot(py) + px * wx + py * wy - self.d
    }

    /// Point of the polar form `r = d / (1 + cos t)` at angle `t` from the
    /// focus-to-vertex direction.
    pub fn polar_point(&self, t: f64) -> (f64, f64) {
        let r = self.d / (1.0 + t.cos());
        let (wx, wy) = (-self.theta_axis.cos(), -self.theta_axis.sin());
        let (nx, ny) = (-wy, wx);
        let (c, s) = (t.cos(), t.sin());
        (
            self.focus.0 + r * (c * wx + s * nx),
            self.focus.1 + r * (c * wy + s * ny),
        )
    }
}

/// Cartesian `y = A x^2 + B x + C` form of the parabola with vertex
/// `vertex`, semi-latus rectum `d` and opening direction `theta_axis`.
///
/// Exact for a vertical axis. A tilted parabola is not single-valued in `x`
/// globally; it is approximated by the least-squares quadratic over the
/// chord `|t| <= d` around the vertex.
pub fn convert_parabola(d: f64, theta_axis: f64, vertex: (f64, f64)) -> Result<Quadratic> {
    if !(d > 0.0) {
        return Err(Error::GeometryInvalid(format!("parabola parameter d = {d}")));
    }
    let (ux, uy) = (theta_axis.cos(), theta_axis.sin());
    if uy.abs() < 1e-3f64.sin() {
        return Err(Error::DegenerateAxis);
    }
    let (vx, vy) = vertex;
    if ux.abs() < 1e-12 {
        let a = uy.signum() / (2.0 * d);
        return Ok(Quadratic {
            a,
            b: -2.0 * a * vx,
            c: a * vx * vx + vy,
        });
    }
    let (nx, ny) = (-uy, ux);
    let points: Vec<(f64, f64)> = (0..=100)
        .map(|k| {
            let t = d * (-1.0 + 2.0 * k as f64 / 100.0);
            let s = t * t / (2.0 * d);
            (vx + s * ux + t * nx, vy + s * uy + t * ny)
        })
        .collect();
    fit_quadratic(&points).ok_or(Error::DegenerateAxis)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaConfig {
    /// Admissible axis tilt from vertical, degrees either side.
    pub tilt_range_deg: f64,
    pub tilt_bin_deg: f64,
    pub d_bin: f64,
    /// `d` search range as multiples of the pupil radius.
    pub d_min_ratio: f64,
    pub d_max_ratio: f64,
    /// Half-width of the search band as a multiple of the pupil radius.
    pub band_ratio: f64,
    /// Peak threshold as a fraction of the band width.
    pub vote_fraction: f64,
}

impl Default for ParabolaConfig {
    fn default() -> Self {
        Self {
            tilt_range_deg: 15.0,
            tilt_bin_deg: 2.0,
            d_bin: 2.0,
            d_min_ratio: 2.0,
            d_max_ratio: 8.0,
            band_ratio: 3.0,
            vote_fraction: 0.25,
        }
    }
}

impl ParabolaConfig {
    pub fn vote_threshold(&self, pupil: &PupilCircle) -> u32 {
        (self.vote_fraction * 2.0 * self.band_ratio * pupil.radius).ceil() as u32
    }

    fn axes(&self, pupil: &PupilCircle) -> (AxisSpec, AxisSpec) {
        let d = AxisSpec::covering(
            self.d_min_ratio * pupil.radius,
            self.d_max_ratio * pupil.radius,
            self.d_bin,
        );
        let range = self.tilt_range_deg.to_radians();
        let tilt = AxisSpec::covering(-range, range, self.tilt_bin_deg.to_radians());
        (d, tilt)
    }
}

/// Edge points inside the search band of one eyelid: rows above (upper) or
/// below (lower) the pupil center, columns within `band_ratio * r`.
pub fn eyelid_band(edges: &EdgeMap, pupil: &PupilCircle, lid: Eyelid, cfg: &ParabolaConfig) -> Vec<EdgePoint> {
    let half = cfg.band_ratio * pupil.radius;
    edges
        .points
        .iter()
        .copied()
        .filter(|p| {
            let (dx, dy) = (p.x as f64 - pupil.cx, p.y as f64 - pupil.cy);
            let in_rows = match lid {
                Eyelid::Upper => dy < 0.0,
                Eyelid::Lower => dy > 0.0,
            };
            in_rows && dx.abs() <= half
        })
        .collect()
}

/// Votes the band's edge points into the `(d, tilt)` plane.
pub fn parabolic_accumulator(edges: &EdgeMap, pupil: &PupilCircle, lid: Eyelid, cfg: &ParabolaConfig) -> Accumulator {
    let (d_axis, tilt_axis) = cfg.axes(pupil);
    let tilts: Vec<(f64, (f64, f64))> = (0..tilt_axis.bins)
        .map(|i| {
            let t = tilt_axis.center(i);
            (t, lid.vertex_direction(t))
        })
        .collect();
    let mut acc = Accumulator::new(vec![d_axis, tilt_axis]);
    for p in eyelid_band(edges, pupil, lid, cfg) {
        let (dx, dy) = (p.x as f64 - pupil.cx, p.y as f64 - pupil.cy);
        let rho = dx.hypot(dy);
        for &(t, (wx, wy)) in &tilts {
            acc.vote(&[rho + dx * wx + dy * wy, t]);
        }
    }
    acc
}

pub fn parabolic_hough(edges: &EdgeMap, pupil: &PupilCircle, lid: Eyelid, cfg: &ParabolaConfig) -> Result<ParabolaParams> {
    let acc = parabolic_accumulator(edges, pupil, lid, cfg);
    let threshold = cfg.vote_threshold(pupil);
    let peak = accumulator_peak(&acc, threshold).map_err(|e| match e {
        Error::NotFound { votes, threshold } => Error::NoParabolaFound { votes, threshold },
        other => other,
    })?;
    let (d, tilt) = refine_peak(&acc, peak);
    ParabolaParams::eyelid(lid, d, tilt, (pupil.cx, pupil.cy))
}

/// Least-squares polish of a Hough eyelid with its focus kept on the
/// pupil center. Band points within `band` pixels of the curve are fitted
/// by a line search over tilt (one bin either side) with `d` the mean of
/// `|p - f| + (p - f).w` at each tilt.
pub fn refine_eyelid(
    edges: &EdgeMap,
    pupil: &PupilCircle,
    lid: Eyelid,
    initial: &ParabolaParams,
    cfg: &ParabolaConfig,
    band: f64,
) -> Result<ParabolaParams> {
    let points: Vec<(f64, f64)> = eyelid_band(edges, pupil, lid, cfg)
        .iter()
        .map(|p| (p.x as f64 - pupil.cx, p.y as f64 - pupil.cy))
        .collect();
    let fit = |tilt: f64, d_ref: f64| -> Option<(f64, f64, usize)> {
        let (wx, wy) = lid.vertex_direction(tilt);
        let vals: Vec<f64> = points
            .iter()
            .map(|&(dx, dy)| dx.hypot(dy) + dx * wx + dy * wy)
            .filter(|v| (v - d_ref).abs() <= band)
            .collect();
        if vals.len() < MIN_REFINE_POINTS {
            return None;
        }
        let n = vals.len() as f64;
        let d = vals.iter().sum::<f64>() / n;
        let sse = vals.iter().map(|v| (v - d).powi(2)).sum::<f64>() / n;
        Some((d, sse, vals.len()))
    };
    let (mut d, mut tilt) = (initial.d, initial.tilt());
    let span = cfg.tilt_bin_deg.to_radians();
    for _ in 0..2 {
        let Some((d0, _, n0)) = fit(tilt, d) else {
            return Ok(*initial);
        };
        // fix the inlier reference at the current fit and scan tilt
        let mut best = (f64::INFINITY, tilt, d0);
        for k in -40..=40 {
            let t = tilt + span * k as f64 / 40.0;
            if let Some((dt, sse, n)) = fit(t, d0) {
                // losing inliers must not look like a better fit
                let score = sse * (n0 as f64 / n as f64).powi(2);
                if score < best.0 {
                    best = (score, t, dt);
                }
            }
        }
        (tilt, d) = (best.1, best.2);
    }
    ParabolaParams::eyelid(lid, d, tilt, (pupil.cx, pupil.cy))
}

/// Vote-weighted centroid of the 3x3 neighbourhood around a 2D peak.
fn refine_peak(acc: &Accumulator, peak: usize) -> (f64, f64) {
    let axes = acc.axes();
    let idx = acc.unravel(peak);
    let (mut w, mut s0, mut s1) = (0.0, 0.0, 0.0);
    for i in idx[0].saturating_sub(1)..=(idx[0] + 1).min(axes[0].bins - 1) {
        for j in idx[1].saturating_sub(1)..=(idx[1] + 1).min(axes[1].bins - 1) {
            let c = acc.cells()[i * axes[1].bins + j] as f64;
            w += c;
            s0 += c * axes[0].center(i);
            s1 += c * axes[1].center(j);
        }
    }
    (s0 / w, s1 / w)
}
