//! Pixel-level primitives: the grayscale container, intensity histogram,
//! Sobel gradient magnitude, edge thresholding and histogram equalization.

pub mod pgm;

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(Error::DataLength {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut img = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y);
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear sample at a sub-pixel position. `None` when the 2x2
    /// neighbourhood is not fully inside the image.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if x > max_x || y > max_y {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let p00 = self.get(x0, y0) as f64;
        let p10 = self.get(x1, y0) as f64;
        let p01 = self.get(x0, y1) as f64;
        let p11 = self.get(x1, y1) as f64;
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        Some(top + (bottom - top) * fy)
    }
}

/// 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; 256],
}

impl Histogram {
    pub fn from_bins(bins: [u64; 256]) -> Self {
        Self { bins }
    }

    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    pub fn count(&self, level: u8) -> u64 {
        self.bins[level as usize]
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    /// Lookup table `floor(255 * cdf(level))`.
    pub fn equalization_lut(&self) -> [u8; 256] {
        let total = self.total();
        let mut lut = [0u8; 256];
        if total == 0 {
            for (k, v) in lut.iter_mut().enumerate() {
                *v = k as u8;
            }
            return lut;
        }
        let mut cumulative = 0u64;
        for (k, &count) in self.bins.iter().enumerate() {
            cumulative += count;
            // integer form of floor(255 * cumulative / total)
            lut[k] = ((255 * cumulative) / total) as u8;
        }
        lut
    }
}

pub fn compute_histogram(img: &GrayImage) -> Histogram {
    let mut bins = [0u64; 256];
    for &v in img.data() {
        bins[v as usize] += 1;
    }
    Histogram { bins }
}

/// Per-pixel Sobel gradient magnitude, rounded to the nearest integer.
/// Border pixels are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradientMagnitude {
    width: usize,
    height: usize,
    values: Vec<u32>,
}

impl GradientMagnitude {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.values[y * self.width + x]
    }
}

/// Gain of the Sobel operator on a unit step: a step of height `h` yields
/// magnitude `SOBEL_GAIN * h` on both flanking pixels.
pub const SOBEL_GAIN: u32 = 4;

pub fn gradient_magnitude(img: &GrayImage) -> Result<GradientMagnitude> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
        });
    }
    let mut values = vec![0u32; w * h];
    let px = |x: usize, y: usize| img.get(x, y) as i32;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
            let gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
            let mag = ((gx * gx + gy * gy) as f64).sqrt().round();
            values[y * w + x] = mag as u32;
        }
    }
    Ok(GradientMagnitude {
        width: w,
        height: h,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgePoint {
    pub x: usize,
    pub y: usize,
    pub magnitude: u32,
}

/// Thresholded edge pixels together with the dimensions of their source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub points: Vec<EdgePoint>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize, points: Vec<EdgePoint>) -> Self {
        Self {
            width,
            height,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps only the points satisfying `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&EdgePoint) -> bool) -> EdgeMap {
        EdgeMap {
            width: self.width,
            height: self.height,
            points: self.points.iter().copied().filter(|p| keep(p)).collect(),
        }
    }
}

/// Interior pixels whose magnitude is at least `t`, in raster order.
pub fn threshold_edges(grid: &GradientMagnitude, t: u32) -> EdgeMap {
    let (w, h) = (grid.width, grid.height);
    let mut points = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let magnitude = grid.get(x, y);
            if magnitude >= t {
                points.push(EdgePoint { x, y, magnitude });
            }
        }
    }
    EdgeMap::new(w, h, points)
}

/// Histogram equalization `out = floor(255 * cdf(in))` over the whole image.
pub fn equalize_histogram(img: &GrayImage) -> GrayImage {
    let lut = compute_histogram(img).equalization_lut();
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step_image(w: usize, h: usize, split: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, _| if x < split { 0 } else { 255 }).unwrap()
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(GrayImage::new(0, 4).is_err());
        assert!(GrayImage::from_vec(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn histogram_of_constant_image() {
        let img = GrayImage::filled(2, 2, 17).unwrap();
        let hist = compute_histogram(&img);
        assert_eq!(hist.count(17), 4);
        assert_eq!(hist.total(), 4);
    }

    #[test]
    fn histogram_extremes() {
        let img = GrayImage::from_vec(1, 2, vec![0, 255]).unwrap();
        let hist = compute_histogram(&img);
        assert_eq!(hist.count(0), 1);
        assert_eq!(hist.count(255), 1);
        assert_eq!(hist.total(), 2);
    }

    #[test]
    fn gradient_rejects_small_images() {
        let img = GrayImage::new(2, 2).unwrap();
        assert!(matches!(
            gradient_magnitude(&img),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn gradient_of_flat_field_is_zero() {
        let img = GrayImage::filled(9, 7, 93).unwrap();
        let g = gradient_magnitude(&img).unwrap();
        assert!(g.values().iter().all(|&v| v == 0));
    }

    #[test]
    fn gradient_peaks_on_step_columns() {
        let img = step_image(10, 6, 5);
        let g = gradient_magnitude(&img).unwrap();
        for y in 1..5 {
            for x in 1..9 {
                let expected = if x == 4 || x == 5 { 4 * 255 } else { 0 };
                assert_eq!(g.get(x, y), expected, "({x},{y})");
            }
        }
        // borders are zero
        assert!((0..10).all(|x| g.get(x, 0) == 0 && g.get(x, 5) == 0));
    }

    #[test]
    fn threshold_on_hand_enumerated_patch() {
        // 5x5: columns 0,1 dark, 2..4 bright. Interior magnitudes by hand:
        // column 1: 4*(255-0) = 1020, column 2: 4*(255-0) = 1020, column 3: 0.
        let img = step_image(5, 5, 2);
        let g = gradient_magnitude(&img).unwrap();
        let edges = threshold_edges(&g, 128 * SOBEL_GAIN);
        let cols: Vec<usize> = edges.points.iter().map(|p| p.x).collect();
        assert_eq!(cols, vec![1, 2, 1, 2, 1, 2]);
        assert!(edges.points.iter().all(|p| p.magnitude == 1020));
    }

    #[test]
    fn threshold_degenerate_cases() {
        let img = GrayImage::filled(6, 5, 40).unwrap();
        let g = gradient_magnitude(&img).unwrap();
        assert!(threshold_edges(&g, 1).is_empty());
        assert_eq!(threshold_edges(&g, 0).len(), 4 * 3);
    }

    #[test]
    fn equalize_constant_image() {
        let img = GrayImage::filled(4, 3, 77).unwrap();
        let out = equalize_histogram(&img);
        assert!(out.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn equalize_two_levels() {
        // cdf(50) = 1/2 -> floor(127.5) = 127; cdf(200) = 1 -> 255
        let img = GrayImage::from_vec(2, 2, vec![50, 200, 50, 200]).unwrap();
        let out = equalize_histogram(&img);
        assert_eq!(out.data(), &[127, 255, 127, 255]);
    }

    #[test]
    fn equalize_uniform_histogram_stays_uniform() {
        let img = GrayImage::from_fn(256, 4, |x, _| x as u8).unwrap();
        let before = compute_histogram(&img);
        let out = equalize_histogram(&img);
        let after = compute_histogram(&out);
        // floor(255 * (k+1)/256) = k for every k, so the histogram is unchanged.
        assert_eq!(before, after);
        for (k, &v) in out.data()[..256].iter().enumerate() {
            assert!((v as i32 - k as i32).abs() <= 1);
        }
    }

    #[test]
    fn bilinear_sampling() {
        let img = GrayImage::from_vec(2, 2, vec![0, 100, 200, 100]).unwrap();
        assert_eq!(img.sample_bilinear(0.5, 0.0), Some(50.0));
        assert_eq!(img.sample_bilinear(0.5, 0.5), Some(100.0));
        assert_eq!(img.sample_bilinear(1.0, 1.0), Some(100.0));
        assert_eq!(img.sample_bilinear(1.01, 0.0), None);
        assert_eq!(img.sample_bilinear(-0.01, 0.0), None);
    }

    fn arb_image() -> impl Strategy<Value = GrayImage> {
        (3usize..24, 3usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |data| GrayImage::from_vec(w, h, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn histogram_sums_to_pixel_count(img in arb_image()) {
            let hist = compute_histogram(&img);
            prop_assert_eq!(hist.total(), (img.width() * img.height()) as u64);
        }

        #[test]
        fn equalization_is_idempotent(img in arb_image()) {
            let once = equalize_histogram(&img);
            let twice = equalize_histogram(&once);
            for (a, b) in once.data().iter().zip(twice.data()) {
                prop_assert!((*a as i32 - *b as i32).abs() <= 1);
            }
        }

        #[test]
        fn equalization_is_monotone(img in arb_image()) {
            let lut = compute_histogram(&img).equalization_lut();
            prop_assert!(lut.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn thresholds_are_nested(img in arb_image(), t1 in 0u32..800, dt in 0u32..400) {
            let g = gradient_magnitude(&img).unwrap();
            let loose = threshold_edges(&g, t1);
            let strict = threshold_edges(&g, t1 + dt);
            prop_assert!(strict.points.iter().all(|p| loose.points.contains(p)));
            prop_assert!(strict.points.iter().all(|p| p.magnitude >= t1 + dt));
        }
    }
}
