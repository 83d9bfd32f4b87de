//! Masked Hamming comparison of iris codes, eye-corner rotation estimate
//! and the authentic/impostor decision.

use std::f64::consts::PI;

use serde::Serialize;

use crate::encoding::{Bits2048, CodeLayout, IrisCode, CODE_BITS};
use crate::error::{Error, Result};
use crate::hough::{ParabolaParams, Quadratic};

pub const DEFAULT_THRESHOLD: f64 = 0.39;
/// Fewer jointly valid bits than this and the comparison is meaningless.
pub const MIN_OVERLAP: usize = CODE_BITS / 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Authentic,
    Impostor,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Authentic => "authentic",
            Decision::Impostor => "impostor",
        })
    }
}

/// Authentic strictly below the threshold; a tie is an impostor.
pub fn decide(hd: f64, threshold: f64) -> Decision {
    if hd < threshold {
        Decision::Authentic
    } else {
        Decision::Impostor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchResult {
    pub hd: f64,
    pub compared_bits: usize,
    /// Cyclic shift applied to the second code, in code columns.
    pub shift_applied: i32,
    pub decision: Decision,
}

impl MatchResult {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.decision = decide(self.hd, threshold);
        self
    }
}

/// Fraction of disagreeing bits among positions valid in both masks.
pub fn hamming_distance(a: &IrisCode, b: &IrisCode) -> Result<MatchResult> {
    let valid = a.mask & b.mask;
    let n = valid.count_ones();
    if n < MIN_OVERLAP {
        return Err(Error::InsufficientOverlap(n));
    }
    let hd = ((a.bits ^ b.bits) & valid).count_ones() as f64 / n as f64;
    Ok(MatchResult {
        hd,
        compared_bits: n,
        shift_applied: 0,
        decision: decide(hd, DEFAULT_THRESHOLD),
    })
}

/// Rolls every (scale, radial) block of `code` right by `s` angular
/// positions, the code-space image of rotating the eye by `s` positions.
pub fn shift_code(code: &IrisCode, s: i32, layout: &CodeLayout) -> IrisCode {
    let n = layout.angular_count();
    let blocks = layout.scales.len() * layout.radial_centers.len();
    let mut out = IrisCode {
        bits: Bits2048::default(),
        mask: Bits2048::default(),
        ..code.clone()
    };
    for block in 0..blocks {
        let base = 2 * block * n;
        for a in 0..n {
            let src = base + 2 * (a as i64 - s as i64).rem_euclid(n as i64) as usize;
            let dst = base + 2 * a;
            for k in 0..2 {
                out.bits.set(dst + k, code.bits.get(src + k));
                out.mask.set(dst + k, code.mask.get(src + k));
            }
        }
    }
    out
}

/// Code-column shift that undoes a relative rotation `delta` (radians).
pub fn rotation_shift(delta: f64, layout: &CodeLayout) -> i32 {
    (delta * layout.angular_count() as f64 / (2.0 * PI)).round() as i32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub threshold: f64,
    /// Half-width of the exhaustive shift search used when a capture has
    /// no rotation estimate, in code columns. One code column spans eight
    /// strip columns (11.25 degrees).
    pub search_radius: i32,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            search_radius: 1,
        }
    }
}

/// Compares `b` to `a` after undoing their relative rotation. With both
/// angles known the shift is computed; otherwise the best of all shifts
/// in `+-search_radius` is taken.
pub fn align_and_match(
    a: &IrisCode,
    angle_a: Option<f64>,
    b: &IrisCode,
    angle_b: Option<f64>,
    layout: &CodeLayout,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    if let (Some(ta), Some(tb)) = (angle_a, angle_b) {
        let s = rotation_shift(tb - ta, layout);
        let mut m = hamming_distance(a, &shift_code(b, s, layout))?;
        m.shift_applied = s;
        return Ok(m.with_threshold(cfg.threshold));
    }
    best_of_shifts(a, b, layout, cfg)
}

pub fn best_of_shifts(a: &IrisCode, b: &IrisCode, layout: &CodeLayout, cfg: &MatchConfig) -> Result<MatchResult> {
    let mut best: Option<MatchResult> = None;
    let mut last_err = None;
    // zero first so ties keep the unshifted comparison
    let shifts = std::iter::once(0).chain((1..=cfg.search_radius).flat_map(|s| [-s, s]));
    for s in shifts {
        match hamming_distance(a, &shift_code(b, s, layout)) {
            Ok(mut m) => {
                m.shift_applied = s;
                if best.is_none_or(|cur| m.hd < cur.hd) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(m) => Ok(m.with_threshold(cfg.threshold)),
        None => Err(last_err.unwrap_or(Error::InsufficientOverlap(0))),
    }
}

/// Left (`p1`) and right (`p2`) crossings of the two eyelid curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EyeCorners {
    pub p1: (f64, f64),
    pub p2: (f64, f64),
}

pub fn quad_intersections(q1: &Quadratic, q2: &Quadratic) -> Result<EyeCorners> {
    let (a, b, c) = (q1.a - q2.a, q1.b - q2.b, q1.c - q2.c);
    if a.abs() < 1e-12 {
        // equal curvature: at most one crossing
        return Err(if b.abs() < 1e-12 {
            Error::NoIntersection
        } else {
            Error::TangentLids
        });
    }
    let disc = b * b - 4.0 * a * c;
    let scale = (b * b).max((4.0 * a * c).abs()).max(1e-300);
    if disc / scale < -1e-9 {
        return Err(Error::NoIntersection);
    }
    if disc.abs() / scale <= 1e-9 {
        return Err(Error::TangentLids);
    }
    let sq = disc.sqrt();
    // cancellation-free roots
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = (q / a, c / q);
    let (x1, x2) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    Ok(EyeCorners {
        p1: (x1, q1.eval(x1)),
        p2: (x2, q1.eval(x2)),
    })
}

pub fn eye_corners(upper: &ParabolaParams, lower: &ParabolaParams) -> Result<EyeCorners> {
    quad_intersections(&upper.quad, &lower.quad)
}

/// Moves a crossing of the Cartesian approximations onto the crossing of
/// the exact curves by Newton steps on their `side` functions. The
/// quadratic form of a tilted lid drifts most near the ends of its fit
/// chord, which is where the corners lie. A step that fails to converge
/// keeps the starting point.
pub fn polish_corner(upper: &ParabolaParams, lower: &ParabolaParams, start: (f64, f64)) -> (f64, f64) {
    let grad = |p: &ParabolaParams, x: f64, y: f64| {
        let (px, py) = (x - p.focus.0, y - p.focus.1);
        let r = px.hypot(py);
        (px / r - p.theta_axis.cos(), py / r - p.theta_axis.sin())
    };
    let (mut x, mut y) = start;
    for _ in 0..20 {
        let (f1, f2) = (upper.side(x, y), lower.side(x, y));
        if f1.abs().max(f2.abs()) < 1e-10 {
            return (x, y);
        }
        let (g1, g2) = (grad(upper, x, y), grad(lower, x, y));
        let det = g1.0 * g2.1 - g1.1 * g2.0;
        if !det.is_finite() || det.abs() < 1e-12 {
            return start;
        }
        x -= (f1 * g2.1 - f2 * g1.1) / det;
        y -= (g1.0 * f2 - g2.0 * f1) / det;
    }
    let ok = upper.side(x, y).abs().max(lower.side(x, y).abs()) < 1e-6;
    let near = (x - start.0).hypot(y - start.1) < 0.25 * upper.d.min(lower.d);
    if ok && near {
        (x, y)
    } else {
        start
    }
}

/// Corners of the quadratic forms, polished onto the exact curves.
pub fn eye_corners_exact(upper: &ParabolaParams, lower: &ParabolaParams) -> Result<EyeCorners> {
    let c = eye_corners(upper, lower)?;
    Ok(EyeCorners {
        p1: polish_corner(upper, lower, c.p1),
        p2: polish_corner(upper, lower, c.p2),
    })
}

/// Angle of the corner-to-center line from the horizontal, signed by the
/// vertical offset of the corner.
pub fn rotation_angle(corner: (f64, f64), center: (f64, f64)) -> Result<f64> {
    let (dx, dy) = (corner.0 - center.0, corner.1 - center.1);
    let hyp = dx.hypot(dy);
    if hyp == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let theta = (dx.abs() / hyp).clamp(-1.0, 1.0).acos();
    Ok(if dy < 0.0 { -theta } else { theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hough::Eyelid;
    use proptest::prelude::*;

    #[test]
    fn polished_corners_lie_on_tilted_lids() {
        let f = (160.0, 140.0);
        let up = ParabolaParams::eyelid(Eyelid::Upper, 120.0, 0.15, f).unwrap();
        let lo = ParabolaParams::eyelid(Eyelid::Lower, 140.0, 0.15, f).unwrap();
        let rough = eye_corners(&up, &lo).unwrap();
        let c = eye_corners_exact(&up, &lo).unwrap();
        for p in [c.p1, c.p2] {
            assert!(up.side(p.0, p.1).abs() < 1e-6 && lo.side(p.0, p.1).abs() < 1e-6, "{p:?}");
        }
        assert!(c.p1.0 < c.p2.0);
        // both curves share the focus, so the corner direction is known in
        // closed form: d1 (1 + cos(phi - a2)) = d2 (1 + cos(phi - a1))
        let (a1, a2) = (up.theta_axis + PI, lo.theta_axis + PI);
        let (pp, qq) = (120.0 * a2.cos() - 140.0 * a1.cos(), 120.0 * a2.sin() - 140.0 * a1.sin());
        let phase = qq.atan2(pp);
        let spread = ((140.0 - 120.0) / pp.hypot(qq)).acos();
        let dir = |p: (f64, f64)| (p.1 - f.1).atan2(p.0 - f.0);
        let expect = [phase + spread, phase - spread];
        for p in [c.p1, c.p2] {
            let d = dir(p);
            assert!(expect.iter().any(|e| (e - d).sin().abs() < 1e-9 && (e - d).cos() > 0.0), "{d} {expect:?}");
        }
        let moved = (rough.p1.0 - c.p1.0).hypot(rough.p1.1 - c.p1.1);
        assert!(moved > 0.0 && moved < 10.0, "{moved}");
    }

    fn code_from(words: [u64; 32]) -> IrisCode {
        IrisCode::from_parts(Bits2048(words), Bits2048::ones())
    }

    #[test]
    fn toy_truth_table() {
        // 0101 vs 0110 on the first four bits, everything else equal
        let mut a = code_from([0; 32]);
        let mut b = code_from([0; 32]);
        for (i, (x, y)) in [(false, false), (true, true), (false, true), (true, false)].into_iter().enumerate() {
            a.bits.set(i, x);
            b.bits.set(i, y);
        }
        a.mask = Bits2048::default();
        b.mask = Bits2048::default();
        for i in 0..4 {
            a.mask.set(i, true);
            b.mask.set(i, true);
        }
        assert!(matches!(hamming_distance(&a, &b), Err(Error::InsufficientOverlap(4))));
        // widen the mask to make the comparison legal; extra bits agree
        a.mask = Bits2048::ones();
        b.mask = Bits2048::ones();
        let m = hamming_distance(&a, &b).unwrap();
        assert_eq!(m.compared_bits, 2048);
        assert_eq!(m.hd, 2.0 / 2048.0);
    }

    #[test]
    fn masked_bits_do_not_vote() {
        let a = code_from([0; 32]);
        let mut b = code_from([u64::MAX; 32]);
        for i in 0..1024 {
            b.bits.set(i, false);
        }
        let mut masked = b.clone();
        for i in 1024..2048 {
            masked.mask.set(i, false);
        }
        assert_eq!(hamming_distance(&a, &b).unwrap().hd, 0.5);
        let m = hamming_distance(&a, &masked).unwrap();
        assert_eq!((m.hd, m.compared_bits), (0.0, 1024));
    }

    #[test]
    fn decision_boundary() {
        assert_eq!(decide(0.10, 0.39), Decision::Authentic);
        assert_eq!(decide(0.50, 0.39), Decision::Impostor);
        assert_eq!(decide(0.39, 0.39), Decision::Impostor);
    }

    #[test]
    fn shift_moves_whole_pairs_within_blocks() {
        let layout = CodeLayout::default();
        let mut c = IrisCode::empty();
        c.mask = Bits2048::ones();
        c.bits.set(layout.offset(2, 5, 31) + 1, true);
        let shifted = shift_code(&c, 1, &layout);
        assert!(shifted.bits.get(layout.offset(2, 5, 0) + 1));
        assert_eq!(shifted.bits.count_ones(), 1);
        let back = shift_code(&shifted, -1, &layout);
        assert_eq!(back, c);
    }

    #[test]
    fn one_position_rotation_is_undone() {
        let layout = CodeLayout::default();
        let a = code_from(std::array::from_fn(|i| (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        // b is a captured one position to the right
        let b = shift_code(&a, 1, &layout);
        let step = 2.0 * PI / 32.0;
        let m = align_and_match(&a, Some(0.3), &b, Some(0.3 - step), &layout, &MatchConfig::default()).unwrap();
        assert_eq!((m.hd, m.shift_applied), (0.0, -1));
        let unaligned = align_and_match(&a, Some(0.0), &b, Some(0.0), &layout, &MatchConfig::default()).unwrap();
        assert!(unaligned.hd > 0.3);
        let searched = best_of_shifts(&a, &b, &layout, &MatchConfig::default()).unwrap();
        assert_eq!((searched.hd, searched.shift_applied), (0.0, -1));
    }

    #[test]
    fn zero_delta_is_plain_distance() {
        let layout = CodeLayout::default();
        let a = code_from([0x1234_5678_9ABC_DEF0; 32]);
        let b = code_from([0x0FED_CBA9_8765_4321; 32]);
        let plain = hamming_distance(&a, &b).unwrap();
        let aligned = align_and_match(&a, Some(1.0), &b, Some(1.0), &layout, &MatchConfig::default()).unwrap();
        assert_eq!(plain, aligned);
    }

    #[test]
    fn closed_form_corners() {
        let up = Quadratic { a: 1.0, b: 0.0, c: 0.0 };
        let down = Quadratic { a: -1.0, b: 0.0, c: 2.0 };
        let c = quad_intersections(&up, &down).unwrap();
        assert!((c.p1.0 + 1.0).abs() < 1e-12 && (c.p1.1 - 1.0).abs() < 1e-12);
        assert!((c.p2.0 - 1.0).abs() < 1e-12 && (c.p2.1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_corners() {
        let q = |a, b, c| Quadratic { a, b, c };
        assert!(matches!(quad_intersections(&q(1.0, 0.0, 0.0), &q(1.0, 2.0, 0.0)), Err(Error::TangentLids)));
        assert!(matches!(quad_intersections(&q(1.0, 0.0, 0.0), &q(1.0, 0.0, 5.0)), Err(Error::NoIntersection)));
        assert!(matches!(quad_intersections(&q(1.0, 0.0, 5.0), &q(-1.0, 0.0, 0.0)), Err(Error::NoIntersection)));
        assert!(matches!(quad_intersections(&q(1.0, 0.0, 0.0), &q(-1.0, 0.0, 0.0)), Err(Error::TangentLids)));
    }

    #[test]
    fn eyelid_corners_lie_on_both_curves() {
        let f = (120.0, 110.0);
        let up = ParabolaParams::eyelid(Eyelid::Upper, 90.0, 0.0, f).unwrap();
        let lo = ParabolaParams::eyelid(Eyelid::Lower, 70.0, 0.0, f).unwrap();
        let c = eye_corners(&up, &lo).unwrap();
        let half = (90.0f64 * 70.0).sqrt();
        assert!((c.p1.0 - (f.0 - half)).abs() < 1e-9 && (c.p2.0 - (f.0 + half)).abs() < 1e-9);
        assert!((c.p1.1 - (f.1 - 10.0)).abs() < 1e-9);
        for p in [c.p1, c.p2] {
            assert!((up.quad.eval(p.0) - p.1).abs() < 1e-6);
            assert!((lo.quad.eval(p.0) - p.1).abs() < 1e-6);
        }
    }

    #[test]
    fn rotation_angle_cases() {
        assert_eq!(rotation_angle((10.0, 0.0), (0.0, 0.0)).unwrap(), 0.0);
        assert!((rotation_angle((3.0, 4.0), (0.0, 0.0)).unwrap() - 0.6f64.acos()).abs() < 1e-12);
        assert!((rotation_angle((3.0, -4.0), (0.0, 0.0)).unwrap() + 0.6f64.acos()).abs() < 1e-12);
        assert!(matches!(rotation_angle((1.0, 1.0), (1.0, 1.0)), Err(Error::CoincidentPoints)));
    }

    proptest! {
        #[test]
        fn metric_properties(x in proptest::array::uniform32(any::<u64>()),
                             y in proptest::array::uniform32(any::<u64>()),
                             z in proptest::array::uniform32(any::<u64>())) {
            let (a, b, c) = (code_from(x), code_from(y), code_from(z));
            let hd = |p: &IrisCode, q: &IrisCode| hamming_distance(p, q).unwrap().hd;
            prop_assert_eq!(hd(&a, &a), 0.0);
            prop_assert_eq!(hd(&a, &IrisCode::from_parts(!a.bits, Bits2048::ones())), 1.0);
            prop_assert_eq!(hd(&a, &b), hd(&b, &a));
            prop_assert!(hd(&a, &c) <= hd(&a, &b) + hd(&b, &c) + 1e-12);
        }

        #[test]
        fn shifts_compose(x in proptest::array::uniform32(any::<u64>()), s in -40i32..40, t in -40i32..40) {
            let layout = CodeLayout::default();
            let a = code_from(x);
            prop_assert_eq!(shift_code(&shift_code(&a, s, &layout), t, &layout), shift_code(&a, s + t, &layout));
            prop_assert_eq!(shift_code(&shift_code(&a, s, &layout), -s, &layout), a);
        }

        #[test]
        fn corners_satisfy_both_quads(a1 in 0.001f64..0.05, a2 in -0.05f64..-0.001,
                                      b1 in -2.0f64..2.0, b2 in -2.0f64..2.0, c1 in 0.0f64..100.0, gap in 5.0f64..80.0) {
            let q1 = Quadratic { a: a1, b: b1, c: c1 };
            let q2 = Quadratic { a: a2, b: b2, c: c1 + gap };
            let c = quad_intersections(&q1, &q2).unwrap();
            prop_assert!(c.p1.0 < c.p2.0);
            for p in [c.p1, c.p2] {
                let tol = 1e-6 * (1.0 + p.1.abs());
                prop_assert!((q1.eval(p.0) - p.1).abs() <= tol);
                prop_assert!((q2.eval(p.0) - p.1).abs() <= tol);
            }
        }
    }
}
