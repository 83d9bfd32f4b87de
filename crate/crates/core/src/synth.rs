//! Deterministic synthetic eyes with known geometry.
//!
//! The iris texture is a function of the pseudo-polar coordinates `(t,
//! theta)` of the rubber-sheet map, so a rendered eye normalizes back to
//! (almost) exactly the painted texture, and a rotated capture of the same
//! identity normalizes to a column-shifted copy.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hough::{EllipseParams, Eyelid, ParabolaParams};
use crate::imaging::GrayImage;
use crate::normalization::{strip_angle, strip_radius, NormalizedStrip};
use crate::segmentation::PupilCircle;

pub const TEXTURE_COMPONENTS: usize = 12;
pub const TEXTURE_BASE: f64 = 128.0;
pub const TEXTURE_AMPLITUDE: f64 = 60.0;
/// Largest angular harmonic a texture component may carry.
pub const MAX_ANGULAR_HARMONIC: i32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sinusoid {
    pub weight: f64,
    /// Cycles across the iris from pupil (t=0) to limbus (t=1).
    pub radial: f64,
    /// Integer, so the texture is continuous across theta = 0.
    pub angular: i32,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Texture {
    /// Seed-drawn sum of sinusoids identifying one eye.
    Identity(u64),
    /// Explicit components.
    Sinusoids(Vec<Sinusoid>),
    /// `round(155 t) + 100`, independent of angle.
    RadialRamp,
}

impl Texture {
    pub fn components(seed: u64) -> Vec<Sinusoid> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7E57_0000_0000_0000);
        (0..TEXTURE_COMPONENTS)
            .map(|_| {
                let k = rng.gen_range(1..=MAX_ANGULAR_HARMONIC);
                Sinusoid {
                    weight: rng.gen_range(0.5..1.0),
                    radial: rng.gen_range(0.5..4.0),
                    angular: if rng.gen_bool(0.5) { k } else { -k },
                    phase: rng.gen_range(0.0..2.0 * PI),
                }
            })
            .collect()
    }

    pub fn sampler(&self) -> TextureSampler {
        match self {
            Texture::Identity(seed) => TextureSampler::Sum(Self::components(*seed)),
            Texture::Sinusoids(parts) => TextureSampler::Sum(parts.clone()),
            Texture::RadialRamp => TextureSampler::Ramp,
        }
    }
}

pub enum TextureSampler {
    Sum(Vec<Sinusoid>),
    Ramp,
}

impl TextureSampler {
    pub fn value(&self, t: f64, theta: f64) -> f64 {
        match self {
            TextureSampler::Ramp => (155.0 * t).round() + 100.0,
            TextureSampler::Sum(parts) => {
                let total: f64 = parts.iter().map(|s| s.weight).sum();
                let sum: f64 = parts
                    .iter()
                    .map(|s| s.weight * (2.0 * PI * s.radial * t + s.angular as f64 * theta + s.phase).cos())
                    .sum();
                TEXTURE_BASE + TEXTURE_AMPLITUDE * sum / total
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EyeSpec {
    pub width: usize,
    pub height: usize,
    pub pupil: PupilCircle,
    pub pupil_intensity: u8,
    pub iris_a: f64,
    pub iris_b: f64,
    pub texture: Texture,
    /// Eyelid parameters `d`; both lids have their focus on the pupil center.
    pub upper_lid: Option<f64>,
    pub lower_lid: Option<f64>,
    pub sclera_intensity: u8,
    pub skin_intensity: u8,
    /// Rotation of the whole eye about the pupil center, radians, positive
    /// clockwise on screen (the direction of increasing strip column).
    pub rotation: f64,
    pub noise: f64,
}

impl EyeSpec {
    /// Clean, unrotated, lid-free eye centered in a 320x280 image.
    pub fn new(seed: u64) -> Self {
        Self {
            width: 320,
            height: 280,
            pupil: PupilCircle {
                cx: 160.0,
                cy: 140.0,
                radius: 30.0,
            },
            pupil_intensity: 20,
            iris_a: 60.0,
            iris_b: 56.0,
            texture: Texture::Identity(seed),
            upper_lid: None,
            lower_lid: None,
            sclera_intensity: 235,
            skin_intensity: 140,
            rotation: 0.0,
            noise: 0.0,
        }
    }

    /// Random geometry drawn from `rng`: pupil radius in [18, 36], iris
    /// axes in [1.35 r, 2.25 r], and a center that keeps the iris inside.
    pub fn random_geometry(self, rng: &mut impl Rng) -> Self {
        let r: f64 = rng.gen_range(18.0..36.0);
        let a = rng.gen_range(1.35 * r..2.25 * r);
        let b = rng.gen_range(1.35 * r..2.25 * r);
        self.placed(rng, r, a, b)
    }

    fn placed(mut self, rng: &mut impl Rng, r: f64, a: f64, b: f64) -> Self {
        let margin_x = a + 8.0;
        let margin_y = b + 8.0;
        self.pupil = PupilCircle {
            cx: rng.gen_range(margin_x..self.width as f64 - margin_x),
            cy: rng.gen_range(margin_y..self.height as f64 - margin_y),
            radius: r,
        };
        self.iris_a = a;
        self.iris_b = b;
        self
    }

    /// Enrollment-style identity: random geometry with a nearly circular
    /// iris (`b / a` within 10%) and both lids present, each with `d` in
    /// [1.8, 2.2] times the larger iris axis so the limbus stays mostly
    /// visible while the lids still cross beside it.
    pub fn random_identity(self, rng: &mut impl Rng) -> Self {
        let r: f64 = rng.gen_range(18.0..36.0);
        let a = rng.gen_range(1.35 * r..2.25 * r);
        let b = (a * rng.gen_range(0.9..1.1)).clamp(1.35 * r, 2.25 * r);
        let mut spec = self.placed(rng, r, a, b);
        let axis = spec.iris_a.max(spec.iris_b);
        spec.upper_lid = Some(rng.gen_range(1.8..2.2) * axis);
        spec.lower_lid = Some(rng.gen_range(1.8..2.2) * axis);
        spec
    }

    /// One capture of this eye: uniform rotation within `max_rotation`
    /// radians either way and sensor noise of amplitude `noise`.
    pub fn capture(&self, rng: &mut impl Rng, max_rotation: f64, noise: f64) -> Self {
        Self {
            rotation: rng.gen_range(-max_rotation..=max_rotation),
            noise,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.pupil.radius;
        let bad = |m: String| Err(Error::SpecInvalid(m));
        if self.width < 3 || self.height < 3 {
            return bad(format!("image {}x{} too small", self.width, self.height));
        }
        if !(r > 0.0) || r >= self.iris_a.min(self.iris_b) {
            return bad(format!("pupil radius {r} must be positive and inside the iris"));
        }
        for (name, axis) in [("a", self.iris_a), ("b", self.iris_b)] {
            let ratio = axis / r;
            if !(1.2..=2.4).contains(&ratio) {
                return bad(format!("iris {name}/r = {ratio:.3} outside [1.2, 2.4]"));
            }
        }
        if !(0.0..self.width as f64).contains(&self.pupil.cx) || !(0.0..self.height as f64).contains(&self.pupil.cy) {
            return bad("pupil center outside the image".into());
        }
        for d in [self.upper_lid, self.lower_lid].into_iter().flatten() {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("eyelid parameter {d}"));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !self.rotation.is_finite() {
            return bad("noise and rotation must be finite, noise non-negative".into());
        }
        Ok(())
    }

    fn center(&self) -> (f64, f64) {
        (self.pupil.cx, self.pupil.cy)
    }

    /// Eyelid curves as they appear in the rendered (rotated) image.
    pub fn lid(&self, lid: Eyelid) -> Option<Result<ParabolaParams>> {
        let d = match lid {
            Eyelid::Upper => self.upper_lid,
            Eyelid::Lower => self.lower_lid,
        }?;
        Some(ParabolaParams::eyelid(lid, d, self.rotation, self.center()))
    }

    /// Canonical-frame region of a point given relative to the pupil center.
    fn region(&self, u: f64, v: f64) -> Region {
        let dist = u.hypot(v);
        if let Some(d) = self.upper_lid {
            // focus at the origin, vertex straight up
            if dist - v - d > 0.0 {
                return Region::Skin;
            }
        }
        if let Some(d) = self.lower_lid {
            if dist + v - d > 0.0 {
                return Region::Skin;
            }
        }
        if dist < self.pupil.radius {
            return Region::Pupil;
        }
        if (u / self.iris_a).powi(2) + (v / self.iris_b).powi(2) < 1.0 {
            return Region::Iris;
        }
        Region::Sclera
    }

    /// Pseudo-polar coordinates of an iris point relative to the center:
    /// the `t` at which the blended boundary passes through it, by bisection
    /// (the blended curve grows monotonically with `t`).
    pub fn iris_coordinates(&self, u: f64, v: f64) -> (f64, f64) {
        let r = self.pupil.radius;
        let (da, db) = (self.iris_a - r, self.iris_b - r);
        let level = |t: f64| (u / (r + t * da)).powi(2) + (v / (r + t * db)).powi(2);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if level(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let theta = (v / (r + t * db)).atan2(u / (r + t * da)).rem_euclid(2.0 * PI);
        (t, theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Pupil,
    Iris,
    Sclera,
    Skin,
}

/// Exact geometry of a rendered eye.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub pupil: PupilCircle,
    pub ellipse: EllipseParams,
    pub rotation: f64,
    pub upper_lid: Option<ParabolaParams>,
    pub lower_lid: Option<ParabolaParams>,
    /// Left and right lid crossings, when both lids are present.
    pub corners: Option<((f64, f64), (f64, f64))>,
}

impl GroundTruth {
    /// Line-based `key=value` record.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: f64| writeln!(s, "{k}={v}").expect("write to string");
        kv("cx", self.pupil.cx);
        kv("cy", self.pupil.cy);
        kv("r", self.pupil.radius);
        kv("a", self.ellipse.a);
        kv("b", self.ellipse.b);
        kv("rotation", self.rotation);
        for (name, lid) in [("upper", &self.upper_lid), ("lower", &self.lower_lid)] {
            if let Some(p) = lid {
                kv(&format!("{name}_d"), p.d);
                kv(&format!("{name}_tilt"), p.tilt());
                kv(&format!("{name}_A"), p.quad.a);
                kv(&format!("{name}_B"), p.quad.b);
                kv(&format!("{name}_C"), p.quad.c);
            }
        }
        if let Some((p1, p2)) = self.corners {
            kv("p1_x", p1.0);
            kv("p1_y", p1.1);
            kv("p2_x", p2.0);
            kv("p2_y", p2.1);
        }
        s
    }
}

const SUPERSAMPLE: usize = 4;

/// Paints `spec`; `seed` drives only the additive noise, so captures of one
/// identity differ by `seed`.
pub fn render(spec: &EyeSpec, seed: u64) -> Result<(GrayImage, GroundTruth)> {
    spec.validate()?;
    let sampler = spec.texture.sampler();
    let (cx, cy) = spec.center();
    let (sin_r, cos_r) = spec.rotation.sin_cos();
    // image offset -> canonical offset: rotate by -rotation
    let canonical = |x: f64, y: f64| {
        let (dx, dy) = (x - cx, y - cy);
        (cos_r * dx + sin_r * dy, -sin_r * dx + cos_r * dy)
    };
    let shade = |u: f64, v: f64| -> f64 {
        match spec.region(u, v) {
            Region::Pupil => spec.pupil_intensity as f64,
            Region::Sclera => spec.sclera_intensity as f64,
            Region::Skin => spec.skin_intensity as f64,
            Region::Iris => {
                let (t, theta) = spec.iris_coordinates(u, v);
                sampler.value(t, theta)
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let (xf, yf) = (x as f64, y as f64);
            let corners = [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)].map(|(ox, oy)| {
                let (u, v) = canonical(xf + ox, yf + oy);
                spec.region(u, v)
            });
            let (u, v) = canonical(xf, yf);
            let center_region = spec.region(u, v);
            let value = if corners.iter().all(|&r| r == center_region) {
                shade(u, v)
            } else {
                let n = SUPERSAMPLE as f64;
                let mut acc = 0.0;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let ox = (sx as f64 + 0.5) / n - 0.5;
                        let oy = (sy as f64 + 0.5) / n - 0.5;
                        let (u, v) = canonical(xf + ox, yf + oy);
                        acc += shade(u, v);
                    }
                }
                acc / (n * n)
            };
            let noise = if spec.noise > 0.0 {
                rng.gen_range(-spec.noise..=spec.noise)
            } else {
                0.0
            };
            data.push((value + noise).round().clamp(0.0, 255.0) as u8);
        }
    }
    let img = GrayImage::from_vec(spec.width, spec.height, data)?;
    Ok((img, ground_truth(spec)?))
}

pub fn ground_truth(spec: &EyeSpec) -> Result<GroundTruth> {
    let upper_lid = spec.lid(Eyelid::Upper).transpose()?;
    let lower_lid = spec.lid(Eyelid::Lower).transpose()?;
    let corners = match (spec.upper_lid, spec.lower_lid) {
        (Some(d1), Some(d2)) => {
            let half = (d1 * d2).sqrt();
            let y = (d2 - d1) / 2.0;
            let (s, c) = spec.rotation.sin_cos();
            let (cx, cy) = spec.center();
            let place = |u: f64, v: f64| (cx + c * u - s * v, cy + s * u + c * v);
            Some((place(-half, y), place(half, y)))
        }
        _ => None,
    };
    Ok(GroundTruth {
        pupil: spec.pupil,
        ellipse: EllipseParams {
            cx: spec.pupil.cx,
            cy: spec.pupil.cy,
            a: spec.iris_a,
            b: spec.iris_b,
        },
        rotation: spec.rotation,
        upper_lid,
        lower_lid,
        corners,
    })
}

/// The texture painted straight onto the strip grid, all cells valid.
pub fn render_strip(texture: &Texture) -> NormalizedStrip {
    let sampler = texture.sampler();
    NormalizedStrip::from_fn(|i, j| sampler.value(strip_radius(i), strip_angle(j)))
}
