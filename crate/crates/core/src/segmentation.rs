//! Pupil extraction: dark histogram peak as threshold, largest connected
//! component, projection-extent center and area-equivalent radius.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{compute_histogram, GrayImage, Histogram};

/// Upper end of the intensity band searched for the pupil peak.
pub const DEFAULT_DARK_LIMIT: u8 = 100;
pub const DEFAULT_MARGIN: u8 = 25;

/// Pupil center `(cx, cy)` and radius, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PupilCircle {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("set", &self.count())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn to_image(&self) -> GrayImage {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        GrayImage::from_vec(self.width, self.height, data).expect("mask dimensions are valid")
    }

    /// Keeps only the largest 4-connected component. Ties go to the
    /// component reached first in raster order.
    pub fn largest_component(&self) -> BinaryMask {
        let (w, h) = (self.width, self.height);
        let mut label = vec![0u32; w * h];
        let mut best = (0u32, 0usize);
        let mut next = 0u32;
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if !self.bits[start] || label[start] != 0 {
                continue;
            }
            next += 1;
            label[start] = next;
            queue.push_back(start);
            let mut size = 0usize;
            while let Some(i) = queue.pop_front() {
                size += 1;
                let (x, y) = (i % w, i / w);
                let mut visit = |j: usize| {
                    if self.bits[j] && label[j] == 0 {
                        label[j] = next;
                        queue.push_back(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
            if size > best.1 {
                best = (next, size);
            }
        }
        BinaryMask {
            width: w,
            height: h,
            bits: label.iter().map(|&l| l != 0 && l == best.0).collect(),
        }
    }
}

/// Most populated bin within `[0, dark_limit]`; ties resolve to the darker level.
pub fn pupil_threshold(hist: &Histogram, dark_limit: u8) -> Result<u8> {
    let mut best: Option<(u8, u64)> = None;
    for level in 0..=dark_limit {
        let count = hist.count(level);
        if count > 0 && best.is_none_or(|(_, c)| count > c) {
            best = Some((level, count));
        }
    }
    best.map(|(level, _)| level)
        .ok_or(Error::NoDarkPeak { limit: dark_limit })
}

/// Pixels with intensity `<= level + margin`, reduced to the largest
/// 4-connected component.
pub fn binarize_pupil(img: &GrayImage, level: u8, margin: u8) -> Result<BinaryMask> {
    let raw = dark_pixels(img, level, margin);
    if raw.count() == 0 {
        return Err(Error::EmptyPupil);
    }
    Ok(raw.largest_component())
}

fn dark_pixels(img: &GrayImage, level: u8, margin: u8) -> BinaryMask {
    let cut = level as u16 + margin as u16;
    BinaryMask {
        width: img.width(),
        height: img.height(),
        bits: img.data().iter().map(|&v| v as u16 <= cut).collect(),
    }
}

/// Midpoints of the x and y projection extents of the mask.
pub fn pupil_center(mask: &BinaryMask) -> Result<(f64, f64)> {
    let mut extent: Option<(usize, usize, usize, usize)> = None;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                extent = Some(match extent {
                    None => (x, x, y, y),
                    Some((x0, x1, y0, y1)) => (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
                });
            }
        }
    }
    let (x0, x1, y0, y1) = extent.ok_or(Error::EmptyPupil)?;
    Ok(((x0 + x1) as f64 / 2.0, (y0 + y1) as f64 / 2.0))
}

/// Radius of the disk with the same area as the mask.
pub fn pupil_radius(mask: &BinaryMask) -> Result<f64> {
    match mask.count() {
        0 => Err(Error::EmptyPupil),
        area => Ok((area as f64 / std::f64::consts::PI).sqrt()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PupilConfig {
    pub dark_limit: u8,
    pub margin: u8,
}

impl Default for PupilConfig {
    fn default() -> Self {
        Self {
            dark_limit: DEFAULT_DARK_LIMIT,
            margin: DEFAULT_MARGIN,
        }
    }
}

/// Histogram threshold, binarization, center and radius in one call.
pub fn segment_pupil(img: &GrayImage, cfg: &PupilConfig) -> Result<(PupilCircle, BinaryMask)> {
    let level = pupil_threshold(&compute_histogram(img), cfg.dark_limit)?;
    let mask = binarize_pupil(img, level, cfg.margin)?;
    let (cx, cy) = pupil_center(&mask)?;
    let radius = pupil_radius(&mask)?;
    Ok((PupilCircle { cx, cy, radius }, mask))
}
