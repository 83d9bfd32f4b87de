//! End-to-end chaining of the stages, the tunable configuration and the
//! per-run diagnostics record.

pub mod calibrate;
pub mod config;
pub mod store;

use std::path::Path;

use serde::Serialize;

use crate::encoding::{encode, CodeLayout, IrisCode};
use crate::error::{Error, Result, Stage};
use crate::hough::{distance_to_ellipse, Accumulator, ellipse_from_accumulator, refine_ellipse, refine_eyelid, elliptic_accumulator, parabolic_hough, EllipseParams, Eyelid, ParabolaParams};
use crate::imaging::{gradient_magnitude, pgm, threshold_edges, EdgeMap, GrayImage};
use crate::matching::{eye_corners_exact, rotation_angle, EyeCorners};
use crate::normalization::{equalize_strip, occlusion_fraction, rubber_sheet, IrisGeometry, NormalizedStrip};
use crate::segmentation::{segment_pupil, BinaryMask, PupilCircle};

pub use calibrate::{calibrate_threshold, Calibration, ScoreHistogram};
pub use config::PipelineConfig;
pub use store::{Scores, StoredTemplate, TemplateStore, Verification};

/// Every intermediate parameter of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub width: usize,
    pub height: usize,
    pub edge_points: usize,
    pub pupil: PupilCircle,
    pub pupil_area: usize,
    pub ellipse: EllipseParams,
    pub upper_lid: Option<ParabolaParams>,
    pub lower_lid: Option<ParabolaParams>,
    pub corners: Option<EyeCorners>,
    pub rotation_angle: Option<f64>,
    /// `rotation_angle` rounded to whole code columns; the remainder is
    /// absorbed by turning the wavelet centers before encoding.
    pub registration_angle: Option<f64>,
    pub occlusion_fraction: f64,
    pub valid_bits: usize,
}

impl Diagnostics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics are plain data")
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub code: IrisCode,
    pub geometry: IrisGeometry,
    pub strip: NormalizedStrip,
    pub diagnostics: Diagnostics,
}

impl PipelineOutput {
    /// Angle to store and match with; always a whole number of code
    /// columns.
    pub fn rotation(&self) -> Option<f64> {
        self.diagnostics.registration_angle
    }
}

/// Everything up to and including eyelid detection.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub geometry: IrisGeometry,
    pub edges: EdgeMap,
    pub pupil_mask: BinaryMask,
    /// The (a, b) votes behind the ellipse, kept for debugging dumps.
    pub accumulator: Accumulator,
}

trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}

pub fn segment(img: &GrayImage, cfg: &PipelineConfig) -> Result<Segmentation> {
    let grad = gradient_magnitude(img).stage(Stage::Gradient)?;
    segment_with_edges(img, threshold_edges(&grad, cfg.gradient_threshold), cfg)
}

/// [`segment`] on a caller-supplied edge map, e.g. one with injected
/// clutter.
pub fn segment_with_edges(img: &GrayImage, edges: EdgeMap, cfg: &PipelineConfig) -> Result<Segmentation> {
    let (pupil, mask) = segment_pupil(img, &cfg.pupil).stage(Stage::Pupil)?;
    let near_pupil = |x: f64, y: f64| ((x - pupil.cx).hypot(y - pupil.cy) - pupil.radius).abs() <= cfg.edge_exclusion;

    let iris_edges = edges.filtered(|p| !near_pupil(p.x as f64, p.y as f64));
    let acc = elliptic_accumulator(&iris_edges, &pupil, &cfg.ellipse)
        .map_err(|e| match e {
            Error::EmptyAnnulus => Error::NoEllipseFound {
                votes: 0,
                threshold: cfg.ellipse.vote_threshold(&pupil),
            },
            other => other,
        })
        .stage(Stage::Ellipse)?;
    let mut ellipse = ellipse_from_accumulator(&acc, &pupil, &cfg.ellipse).stage(Stage::Ellipse)?;
    if cfg.refine_fits {
        // the polished fit must stay inside the annulus the vote searched
        let refined = refine_ellipse(&iris_edges.points, &ellipse, cfg.refine_band);
        let (lo, hi) = (cfg.ellipse.min_ratio * pupil.radius, cfg.ellipse.max_ratio * pupil.radius);
        if [refined.a, refined.b].iter().all(|v| (lo..=hi).contains(v)) {
            ellipse = refined;
        }
    }

    let mut geometry = IrisGeometry::new(pupil, ellipse);
    if cfg.detect_lids {
        let lid_edges = iris_edges.filtered(|p| {
            let (x, y) = (p.x as f64, p.y as f64);
            distance_to_ellipse(&ellipse, x, y) > cfg.edge_exclusion
                && (x - pupil.cx).hypot(y - pupil.cy) > pupil.radius + cfg.edge_exclusion
        });
        let find = |lid| match parabolic_hough(&lid_edges, &pupil, lid, &cfg.parabola) {
            Ok(p) if cfg.refine_fits => {
                refine_eyelid(&lid_edges, &pupil, lid, &p, &cfg.parabola, cfg.refine_band).map(Some)
            }
            Ok(p) => Ok(Some(p)),
            Err(Error::NoParabolaFound { .. }) => Ok(None),
            Err(e) => Err(e),
        };
        geometry.upper_lid = find(Eyelid::Upper).stage(Stage::Eyelids)?;
        geometry.lower_lid = find(Eyelid::Lower).stage(Stage::Eyelids)?;
    }
    Ok(Segmentation {
        geometry,
        edges,
        pupil_mask: mask,
        accumulator: acc,
    })
}

/// Rotation estimate from the left eye corner, when both lids were found
/// and they cross.
pub fn corner_rotation(geom: &IrisGeometry) -> (Option<EyeCorners>, Option<f64>) {
    let (Some(up), Some(lo)) = (&geom.upper_lid, &geom.lower_lid) else {
        return (None, None);
    };
    match eye_corners_exact(up, lo) {
        Ok(c) => (Some(c), rotation_angle(c.p1, (geom.pupil.cx, geom.pupil.cy)).ok()),
        Err(_) => (None, None),
    }
}

/// Splits a rotation estimate into whole code columns and the sub-column
/// remainder, `angle = registration + remainder`.
pub fn split_rotation(angle: f64, layout: &CodeLayout) -> (f64, f64) {
    let col = layout.column_angle();
    let registration = (angle / col).round() * col;
    (registration, angle - registration)
}

pub fn run_pipeline(img: &GrayImage, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let seg = segment(img, cfg)?;
    let geometry = seg.geometry;
    let strip = equalize_strip(&rubber_sheet(img, &geometry).stage(Stage::Normalize)?);
    let (corners, rotation) = corner_rotation(&geometry);
    let split = rotation.map(|t| split_rotation(t, &cfg.layout));
    let layout = match split {
        Some((_, remainder)) => cfg.layout.rotated(-remainder),
        None => cfg.layout.clone(),
    };
    let code = encode(&strip, &layout, &cfg.encoder).stage(Stage::Encode)?;
    let diagnostics = Diagnostics {
        width: img.width(),
        height: img.height(),
        edge_points: seg.edges.len(),
        pupil: geometry.pupil,
        pupil_area: seg.pupil_mask.count(),
        ellipse: geometry.ellipse,
        upper_lid: geometry.upper_lid,
        lower_lid: geometry.lower_lid,
        corners,
        rotation_angle: rotation,
        registration_angle: split.map(|(r, _)| r),
        occlusion_fraction: occlusion_fraction(&strip),
        valid_bits: code.mask.count_ones(),
    };
    Ok(PipelineOutput {
        code,
        geometry,
        strip,
        diagnostics,
    })
}

pub fn run_pipeline_path(path: impl AsRef<Path>, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let img = pgm::read(path).stage(Stage::Load)?;
    run_pipeline(&img, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{render, EyeSpec};

    #[test]
    fn tiny_image_fails_in_gradient_stage() {
        let img = GrayImage::filled(2, 2, 0).unwrap();
        let err = run_pipeline(&img, &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Gradient));
        assert!(matches!(err.root(), Error::ImageTooSmall { .. }));
    }

    #[test]
    fn black_image_has_no_ellipse() {
        let img = GrayImage::filled(64, 64, 0).unwrap();
        let err = run_pipeline(&img, &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Ellipse));
        assert!(matches!(err.root(), Error::NoEllipseFound { votes: 0, .. }));
    }

    #[test]
    fn rotation_split() {
        let layout = CodeLayout::default();
        let col = layout.column_angle();
        for angle in [0.0, 0.3, -0.3, 1.7 * col, -2.5 * col + 1e-9, 3.0] {
            let (reg, rem) = split_rotation(angle, &layout);
            assert!((reg + rem - angle).abs() < 1e-12);
            assert!(rem.abs() <= 0.5 * col + 1e-12);
            assert!(((reg / col) - (reg / col).round()).abs() < 1e-9);
        }
    }

    #[test]
    fn ellipse_distance() {
        let e = EllipseParams { cx: 0.0, cy: 0.0, a: 10.0, b: 5.0 };
        assert!((distance_to_ellipse(&e, 12.0, 0.0) - 2.0).abs() < 1e-12);
        assert!((distance_to_ellipse(&e, 0.0, 4.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clean_eye_end_to_end() {
        let spec = EyeSpec::new(21);
        let (img, truth) = render(&spec, 1).unwrap();
        let out = run_pipeline(&img, &PipelineConfig::default()).unwrap();
        let d = &out.diagnostics;
        assert!((d.pupil.cx - truth.pupil.cx).abs() <= 1.0 && (d.pupil.cy - truth.pupil.cy).abs() <= 1.0);
        assert!((d.ellipse.a - truth.ellipse.a).abs() <= 1.0 && (d.ellipse.b - truth.ellipse.b).abs() <= 1.0);
        assert!(d.upper_lid.is_none() && d.lower_lid.is_none(), "{d:?}");
        assert_eq!(d.occlusion_fraction, 0.0);
        assert_eq!(d.valid_bits, 2048);
        assert!(d.to_json().contains("\"occlusion_fraction\": 0.0"));
    }
}
