//! 2D Gabor phase demodulation of the normalized strip into a 2048-bit iris
//! code with a parallel validity mask.
//!
//! Each wavelet is evaluated on the polar strip as
//!
//! ```text
//! sum over cells: e^{-i w (t0 - phi)} e^{-(r0 - rho)^2 / a^2} e^{-(t0 - phi)^2 / b^2} (I - m) rho
//! ```
//!
//! over a window of +-3a rows and +-3b columns (wrapping in angle), where
//! `m` is the envelope-weighted mean of the valid cells. Removing `m` makes
//! the response blind to brightness offsets; the phase is blind to gain.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::normalization::{occlusion_fraction, strip_radius, NormalizedStrip, STRIP_COLS, STRIP_ROWS};

pub const CODE_BITS: usize = 2048;
pub const CODE_WORDS: usize = CODE_BITS / 64;
pub const CODE_BYTES: usize = CODE_BITS / 8;
const ROW_STEP: f64 = 1.0 / (STRIP_ROWS - 1) as f64;
const COL_STEP: f64 = 2.0 * PI / STRIP_COLS as f64;

/// One wavelet: carrier `omega` (radians per radian of angle), radial width
/// `alpha` (normalized radius), angular width `beta` (radians) and center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r0: f64,
    pub theta0: f64,
}

/// Envelope widths of one scale, in strip cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub alpha_cells: f64,
    pub beta_cells: f64,
}

impl Scale {
    /// Carrier of half a cycle per angular envelope width.
    pub fn params(&self, r0: f64, theta0: f64) -> GaborParams {
        let beta = self.beta_cells * COL_STEP;
        GaborParams {
            omega: PI / beta,
            alpha: self.alpha_cells * ROW_STEP,
            beta,
            r0,
            theta0,
        }
    }
}

/// Placement of the wavelet applications that make up a code.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeLayout {
    pub radial_centers: Vec<f64>,
    pub angular_centers: Vec<f64>,
    pub scales: Vec<Scale>,
}

impl Default for CodeLayout {
    /// 8 radial x 32 angular centers with half-cell margins and the
    /// geometric ladder 1.5, 3, 6, 12 cells (finest first).
    fn default() -> Self {
        Self::uniform(8, 32, &[1.5, 3.0, 6.0, 12.0])
    }
}

impl CodeLayout {
    pub fn uniform(radial: usize, angular: usize, widths: &[f64]) -> Self {
        Self {
            radial_centers: (0..radial).map(|k| (k as f64 + 0.5) / radial as f64).collect(),
            angular_centers: (0..angular)
                .map(|k| 2.0 * PI * (k as f64 + 0.5) / angular as f64)
                .collect(),
            scales: widths
                .iter()
                .map(|&w| Scale {
                    alpha_cells: w,
                    beta_cells: w,
                })
                .collect(),
        }
    }

    pub fn applications(&self) -> usize {
        self.scales.len() * self.radial_centers.len() * self.angular_centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        match 2 * self.applications() {
            CODE_BITS => Ok(()),
            n => Err(Error::LayoutMismatch(n)),
        }
    }

    /// Code bit offset of the first bit of one application. Scale-major,
    /// then radial, then angular.
    pub fn offset(&self, scale: usize, radial: usize, angular: usize) -> usize {
        2 * ((scale * self.radial_centers.len() + radial) * self.angular_centers.len() + angular)
    }

    pub fn angular_count(&self) -> usize {
        self.angular_centers.len()
    }

    /// Angular spacing of the centers, one code column.
    pub fn column_angle(&self) -> f64 {
        2.0 * PI / self.angular_centers.len() as f64
    }

    /// The same layout with every angular center moved by `offset` radians.
    pub fn rotated(&self, offset: f64) -> Self {
        Self {
            angular_centers: self.angular_centers.iter().map(|t| t + offset).collect(),
            ..self.clone()
        }
    }

    fn params(&self, index: usize) -> GaborParams {
        let per_scale = self.radial_centers.len() * self.angular_centers.len();
        let (s, rest) = (index / per_scale, index % per_scale);
        let (r, a) = (rest / self.angular_centers.len(), rest % self.angular_centers.len());
        self.scales[s].params(self.radial_centers[r], self.angular_centers[a])
    }
}

/// Windowed, mean-corrected Gabor response at `p.r0`, `p.theta0`.
/// Fails with `InsufficientSupport` when fewer than `min_support` of the
/// window cells are unmasked.
pub fn gabor_response(strip: &NormalizedStrip, p: &GaborParams, min_support: f64) -> Result<Complex64> {
    let row_lo = ((p.r0 - 3.0 * p.alpha) / ROW_STEP).ceil().max(0.0) as usize;
    let row_hi = ((p.r0 + 3.0 * p.alpha) / ROW_STEP).floor().min((STRIP_ROWS - 1) as f64);
    let col_lo = ((p.theta0 - 3.0 * p.beta) / COL_STEP).ceil() as i64;
    let col_hi = ((p.theta0 + 3.0 * p.beta) / COL_STEP).floor() as i64;
    assert!(col_hi - col_lo < STRIP_COLS as i64, "angular window wraps onto itself");
    if row_hi < row_lo as f64 {
        return Err(Error::InsufficientSupport { valid: 0, total: 0 });
    }
    let row_hi = row_hi as usize;

    let radial: Vec<f64> = (row_lo..=row_hi)
        .map(|i| {
            let rho = strip_radius(i);
            let dr = (p.r0 - rho) / p.alpha;
            rho * (-dr * dr).exp()
        })
        .collect();
    // (column, envelope, carrier)
    let angular: Vec<(usize, f64, Complex64)> = (col_lo..=col_hi)
        .map(|k| {
            let u = p.theta0 - k as f64 * COL_STEP;
            let env = (-(u / p.beta) * (u / p.beta)).exp();
            let col = k.rem_euclid(STRIP_COLS as i64) as usize;
            (col, env, Complex64::from_polar(1.0, -p.omega * u))
        })
        .collect();

    let total = radial.len() * angular.len();
    let mut valid = 0usize;
    let (mut sw, mut swi) = (0.0, 0.0);
    let (mut sk, mut ski) = (Complex64::default(), Complex64::default());
    for (di, &wr) in radial.iter().enumerate() {
        let row = row_lo + di;
        for &(col, env, carrier) in &angular {
            if !strip.valid(row, col) {
                continue;
            }
            valid += 1;
            let w = wr * env;
            let v = strip.value(row, col);
            sw += w;
            swi += w * v;
            sk += carrier * w;
            ski += carrier * (w * v);
        }
    }
    if (valid as f64) < min_support * total as f64 || sw <= 0.0 {
        return Err(Error::InsufficientSupport { valid, total });
    }
    Ok(ski - sk * (swi / sw))
}

/// Two-bit Gray label of the quadrant containing `phase`, on half-open
/// quadrants `[0, pi/2)`, `[pi/2, pi)`, `[pi, 3pi/2)`, `[3pi/2, 2pi)`.
pub fn quadrant_code(phase: f64) -> [bool; 2] {
    let mut phase = phase.rem_euclid(2.0 * PI);
    if phase >= 2.0 * PI {
        phase = 0.0;
    }
    if phase < PI / 2.0 {
        [true, true]
    } else if phase < PI {
        [false, true]
    } else if phase < 1.5 * PI {
        [false, false]
    } else {
        [true, false]
    }
}

pub fn phase_of(z: Complex64) -> f64 {
    z.im.atan2(z.re).rem_euclid(2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    /// Minimum unmasked fraction of a wavelet window.
    pub min_support: f64,
    /// Strips with a larger occluded fraction are rejected.
    pub max_occlusion: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            min_support: 0.7,
            max_occlusion: 0.6,
        }
    }
}

/// Phase-quadrant code of a strip. Bits `2k, 2k+1` come from application
/// `k` (see [`CodeLayout::offset`]); mask bits are cleared where the
/// window lacked support.
pub fn encode(strip: &NormalizedStrip, layout: &CodeLayout, cfg: &EncoderConfig) -> Result<IrisCode> {
    layout.validate()?;
    let fraction = occlusion_fraction(strip);
    if fraction >= cfg.max_occlusion {
        return Err(Error::TooOccluded {
            fraction,
            gate: cfg.max_occlusion,
        });
    }
    let pairs: Vec<Option<[bool; 2]>> = (0..layout.applications())
        .into_par_iter()
        .map(|k| {
            gabor_response(strip, &layout.params(k), cfg.min_support)
                .ok()
                .map(|z| quadrant_code(phase_of(z)))
        })
        .collect();
    let mut code = IrisCode::empty();
    for (k, pair) in pairs.into_iter().enumerate() {
        if let Some([b0, b1]) = pair {
            code.set(2 * k, b0, true);
            code.set(2 * k + 1, b1, true);
        }
    }
    Ok(code)
}

/// Fixed-size bit set used for both code and mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bits2048(pub [u64; CODE_WORDS]);

impl Default for Bits2048 {
    fn default() -> Self {
        Self([0; CODE_WORDS])
    }
}

impl std::fmt::Debug for Bits2048 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Bits2048({} set)", self.count_ones())
    }
}

impl Bits2048 {
    pub fn ones() -> Self {
        Self([u64::MAX; CODE_WORDS])
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let bit = 1u64 << (i % 64);
        if v {
            self.0[i / 64] |= bit;
        } else {
            self.0[i / 64] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Little-endian bytes: bit 0 of byte 0 is bit 0.
    pub fn to_bytes(&self) -> [u8; CODE_BYTES] {
        let mut out = [0u8; CODE_BYTES];
        for (chunk, word) in out.chunks_exact_mut(8).zip(&self.0) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut words = [0u64; CODE_WORDS];
        for (word, chunk) in words.iter_mut().zip(bytes.chunks_exact(8)) {
            *word = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Self(words)
    }
}

impl std::ops::BitXor for Bits2048 {
    type Output = Self;
    fn bitxor(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a ^= b;
        }
        self
    }
}

impl std::ops::BitAnd for Bits2048 {
    type Output = Self;
    fn bitand(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a &= b;
        }
        self
    }
}

impl std::ops::Not for Bits2048 {
    type Output = Self;
    fn not(mut self) -> Self {
        for a in self.0.iter_mut() {
            *a = !*a;
        }
        self
    }
}

pub const CODE_MAGIC: &[u8; 4] = b"IRC1";
pub const CODE_VERSION: u8 = 1;

/// The biometric signature: 2048 phase bits, 2048 validity bits and the
/// labels identifying whose capture it is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrisCode {
    pub bits: Bits2048,
    pub mask: Bits2048,
    pub subject: String,
    pub capture: String,
}

impl IrisCode {
    pub fn empty() -> Self {
        Self {
            bits: Bits2048::default(),
            mask: Bits2048::default(),
            subject: String::new(),
            capture: String::new(),
        }
    }

    pub fn from_parts(bits: Bits2048, mask: Bits2048) -> Self {
        Self {
            bits,
            mask,
            ..Self::empty()
        }
    }

    pub fn set(&mut self, i: usize, bit: bool, valid: bool) {
        self.bits.set(i, bit);
        self.mask.set(i, valid);
    }

    pub fn with_labels(mut self, subject: impl Into<String>, capture: impl Into<String>) -> Self {
        self.subject = subject.into();
        self.capture = capture.into();
        self
    }

    /// `IRC1`, version byte, 256 code bytes, 256 mask bytes, one length byte
    /// and the UTF-8 subject label.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let label = self.subject.as_bytes();
        if label.len() > u8::MAX as usize {
            return Err(Error::CodeFormat(format!("subject label is {} bytes, max 255", label.len())));
        }
        let mut out = Vec::with_capacity(4 + 1 + 2 * CODE_BYTES + 1 + label.len());
        out.extend_from_slice(CODE_MAGIC);
        out.push(CODE_VERSION);
        out.extend_from_slice(&self.bits.to_bytes());
        out.extend_from_slice(&self.mask.to_bytes());
        out.push(label.len() as u8);
        out.extend_from_slice(label);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = 4 + 1 + 2 * CODE_BYTES + 1;
        if bytes.len() < header {
            return Err(Error::CodeFormat(format!("{} bytes, need at least {header}", bytes.len())));
        }
        if &bytes[..4] != CODE_MAGIC {
            return Err(Error::CodeFormat("bad magic".into()));
        }
        if bytes[4] != CODE_VERSION {
            return Err(Error::CodeFormat(format!("unsupported version {}", bytes[4])));
        }
        let bits = Bits2048::from_bytes(&bytes[5..5 + CODE_BYTES]);
        let mask = Bits2048::from_bytes(&bytes[5 + CODE_BYTES..5 + 2 * CODE_BYTES]);
        let len = bytes[header - 1] as usize;
        if bytes.len() != header + len {
            return Err(Error::CodeFormat(format!(
                "label length {len} does not match {} trailing bytes",
                bytes.len() - header
            )));
        }
        let subject = std::str::from_utf8(&bytes[header..])
            .map_err(|_| Error::CodeFormat("label is not UTF-8".into()))?
            .to_string();
        Ok(Self {
            bits,
            mask,
            subject,
            capture: String::new(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
