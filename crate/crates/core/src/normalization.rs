//! Rubber-sheet unwrapping of the iris annulus into a fixed 64x256
//! pseudo-polar strip, with an occlusion mask and contrast equalization.
//!
//! Row `i` sits at radial blend `t = i / 63` between the pupil circle and the
//! iris ellipse, column `j` at angle `2 pi j / 256`, measured from the +x
//! axis towards +y (clockwise on screen).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hough::{EllipseParams, ParabolaParams};
use crate::imaging::{GrayImage, Histogram};
use crate::segmentation::PupilCircle;

pub const STRIP_ROWS: usize = 64;
pub const STRIP_COLS: usize = 256;
pub const STRIP_CELLS: usize = STRIP_ROWS * STRIP_COLS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrisGeometry {
    pub pupil: PupilCircle,
    pub ellipse: EllipseParams,
    pub upper_lid: Option<ParabolaParams>,
    pub lower_lid: Option<ParabolaParams>,
}

impl IrisGeometry {
    pub fn new(pupil: PupilCircle, ellipse: EllipseParams) -> Self {
        Self {
            pupil,
            ellipse,
            upper_lid: None,
            lower_lid: None,
        }
    }
}

/// Normalized iris texture with its validity mask (`true` = usable).
#[derive(Clone, PartialEq)]
pub struct NormalizedStrip {
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl std::fmt::Debug for NormalizedStrip {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormalizedStrip")
            .field("occlusion", &occlusion_fraction(self))
            .finish_non_exhaustive()
    }
}

impl NormalizedStrip {
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(STRIP_CELLS);
        for i in 0..STRIP_ROWS {
            for j in 0..STRIP_COLS {
                values.push(f(i, j));
            }
        }
        Self {
            values,
            mask: vec![true; STRIP_CELLS],
        }
    }

    pub fn from_parts(values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != STRIP_CELLS || mask.len() != STRIP_CELLS {
            return Err(Error::GeometryInvalid(format!(
                "strip needs {STRIP_CELLS} cells, got {} values / {} mask bits",
                values.len(),
                mask.len()
            )));
        }
        Ok(Self { values, mask })
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * STRIP_COLS + col]
    }

    #[inline]
    pub fn valid(&self, row: usize, col: usize) -> bool {
        self.mask[row * STRIP_COLS + col]
    }

    pub fn set_valid(&mut self, row: usize, col: usize, v: bool) {
        self.mask[row * STRIP_COLS + col] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Applies `f` to every intensity, leaving the mask untouched.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Rotates every row right by `cols` columns (cyclically).
    pub fn roll(&self, cols: isize) -> Self {
        let shift = cols.rem_euclid(STRIP_COLS as isize) as usize;
        let mut out = self.clone();
        for i in 0..STRIP_ROWS {
            for j in 0..STRIP_COLS {
                let dst = i * STRIP_COLS + (j + shift) % STRIP_COLS;
                out.values[dst] = self.values[i * STRIP_COLS + j];
                out.mask[dst] = self.mask[i * STRIP_COLS + j];
            }
        }
        out
    }

    /// Intensities rounded and clamped to 8 bits.
    pub fn to_image(&self) -> GrayImage {
        let data = self.values.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
        GrayImage::from_vec(STRIP_COLS, STRIP_ROWS, data).expect("fixed strip size")
    }

    pub fn mask_image(&self) -> GrayImage {
        let data = self.mask.iter().map(|&b| if b { 255 } else { 0 }).collect();
        GrayImage::from_vec(STRIP_COLS, STRIP_ROWS, data).expect("fixed strip size")
    }
}

pub fn strip_radius(row: usize) -> f64 {
    row as f64 / (STRIP_ROWS - 1) as f64
}

pub fn strip_angle(col: usize) -> f64 {
    2.0 * PI * col as f64 / STRIP_COLS as f64
}

/// Pupil-circle point and iris-ellipse point at angle `theta`.
pub fn boundary_points(geom: &IrisGeometry, theta: f64) -> ((f64, f64), (f64, f64)) {
    let (s, c) = theta.sin_cos();
    let p = &geom.pupil;
    let e = &geom.ellipse;
    (
        (p.cx + p.radius * c, p.cy + p.radius * s),
        (e.cx + e.a * c, e.cy + e.b * s),
    )
}

/// Source point for blend `t` in `[0, 1]`: `(1 - t) * pupil + t * iris`.
pub fn source_point(geom: &IrisGeometry, t: f64, theta: f64) -> (f64, f64) {
    let ((xp, yp), (xi, yi)) = boundary_points(geom, theta);
    ((1.0 - t) * xp + t * xi, (1.0 - t) * yp + t * yi)
}

/// Why a strip cell is excluded, if it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occlusion {
    OutOfImage,
    InsidePupil,
    UpperLid,
    LowerLid,
}

pub fn occlusion_at(img_width: usize, img_height: usize, geom: &IrisGeometry, x: f64, y: f64) -> Option<Occlusion> {
    if !(x >= 0.0 && y >= 0.0 && x <= (img_width - 1) as f64 && y <= (img_height - 1) as f64) {
        return Some(Occlusion::OutOfImage);
    }
    let p = &geom.pupil;
    // small tolerance so that row 0, which lies on the circle, stays valid
    if (x - p.cx).hypot(y - p.cy) < p.radius - 1e-9 {
        return Some(Occlusion::InsidePupil);
    }
    if geom.upper_lid.is_some_and(|lid| lid.side(x, y) > 0.0) {
        return Some(Occlusion::UpperLid);
    }
    if geom.lower_lid.is_some_and(|lid| lid.side(x, y) > 0.0) {
        return Some(Occlusion::LowerLid);
    }
    None
}

/// Unwraps the iris into a 64x256 strip by bilinear sampling along the
/// pupil-to-ellipse blend. Occluded cells keep a 0 intensity and a cleared
/// mask bit.
pub fn rubber_sheet(img: &GrayImage, geom: &IrisGeometry) -> Result<NormalizedStrip> {
    let p = &geom.pupil;
    let (w, h) = (img.width(), img.height());
    if !(p.cx >= 0.0 && p.cy >= 0.0 && p.cx < w as f64 && p.cy < h as f64) {
        return Err(Error::GeometryInvalid(format!(
            "pupil center ({:.1}, {:.1}) outside {w}x{h} image",
            p.cx, p.cy
        )));
    }
    if !(p.radius > 0.0 && geom.ellipse.a > 0.0 && geom.ellipse.b > 0.0) {
        return Err(Error::GeometryInvalid("non-positive radius".into()));
    }
    let mut values = vec![0.0; STRIP_CELLS];
    let mut mask = vec![false; STRIP_CELLS];
    for j in 0..STRIP_COLS {
        let theta = strip_angle(j);
        for i in 0..STRIP_ROWS {
            let (x, y) = source_point(geom, strip_radius(i), theta);
            if occlusion_at(w, h, geom, x, y).is_none() {
                if let Some(v) = img.sample_bilinear(x, y) {
                    values[i * STRIP_COLS + j] = v;
                    mask[i * STRIP_COLS + j] = true;
                }
            }
        }
    }
    NormalizedStrip::from_parts(values, mask)
}

/// Fraction of strip cells whose mask bit is cleared.
pub fn occlusion_fraction(strip: &NormalizedStrip) -> f64 {
    strip.mask.iter().filter(|&&v| !v).count() as f64 / STRIP_CELLS as f64
}

/// Histogram equalization computed over the unmasked cells only. Values
/// are rounded to 8 bits first; masked cells and the mask are untouched.
pub fn equalize_strip(strip: &NormalizedStrip) -> NormalizedStrip {
    let level = |v: f64| v.round().clamp(0.0, 255.0) as usize;
    let mut bins = [0u64; 256];
    for (v, _) in strip.values.iter().zip(&strip.mask).filter(|(_, &m)| m) {
        bins[level(*v)] += 1;
    }
    let lut = Histogram::from_bins(bins).equalization_lut();
    let values = strip
        .values
        .iter()
        .zip(&strip.mask)
        .map(|(&v, &m)| if m { lut[level(v)] as f64 } else { v })
        .collect();
    NormalizedStrip {
        values,
        mask: strip.mask.clone(),
    }
}

/// Rubber sheet followed by equalization.
pub fn normalize(img: &GrayImage, geom: &IrisGeometry) -> Result<NormalizedStrip> {
    Ok(equalize_strip(&rubber_sheet(img, geom)?))
}
