//! Line-based `key=value` configuration. Blank lines and `#` comments are
//! ignored; unknown keys are errors.

use std::path::Path;
use std::str::FromStr;

use crate::encoding::{CodeLayout, EncoderConfig};
use crate::error::{Error, Result};
use crate::hough::{EllipseConfig, ParabolaConfig};
use crate::matching::MatchConfig;
use crate::segmentation::PupilConfig;

pub const DEFAULT_GRADIENT_THRESHOLD: u32 = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub pupil: PupilConfig,
    pub gradient_threshold: u32,
    /// Edges within this many pixels of an already found boundary are not
    /// offered to later detectors.
    pub edge_exclusion: f64,
    pub ellipse: EllipseConfig,
    pub detect_lids: bool,
    pub parabola: ParabolaConfig,
    /// Polish the Hough ellipse and eyelids by least squares on the edge
    /// points within `refine_band` pixels of them.
    pub refine_fits: bool,
    pub refine_band: f64,
    pub layout: CodeLayout,
    pub encoder: EncoderConfig,
    pub matching: MatchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pupil: PupilConfig::default(),
            gradient_threshold: DEFAULT_GRADIENT_THRESHOLD,
            edge_exclusion: 3.0,
            ellipse: EllipseConfig::default(),
            detect_lids: true,
            parabola: ParabolaConfig::default(),
            refine_fits: true,
            refine_band: 2.5,
            layout: CodeLayout::default(),
            encoder: EncoderConfig::default(),
            matching: MatchConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl PipelineConfig {
    pub const KEYS: &'static [&'static str] = &[
        "dark_limit",
        "pupil_margin",
        "gradient_threshold",
        "edge_exclusion",
        "ellipse_theta_samples",
        "ellipse_epsilon",
        "ellipse_bin",
        "ellipse_vote_fraction",
        "ellipse_min_ratio",
        "ellipse_max_ratio",
        "detect_lids",
        "lid_tilt_range_deg",
        "lid_tilt_bin_deg",
        "lid_d_bin",
        "lid_d_min_ratio",
        "lid_d_max_ratio",
        "lid_band_ratio",
        "lid_vote_fraction",
        "refine_fits",
        "refine_band",
        "min_support",
        "max_occlusion",
        "threshold",
        "search_radius",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dark_limit" => self.pupil.dark_limit = parse(key, value)?,
            "pupil_margin" => self.pupil.margin = parse(key, value)?,
            "gradient_threshold" => self.gradient_threshold = parse(key, value)?,
            "edge_exclusion" => self.edge_exclusion = parse(key, value)?,
            "ellipse_theta_samples" => self.ellipse.theta_samples = parse(key, value)?,
            "ellipse_epsilon" => self.ellipse.epsilon = parse(key, value)?,
            "ellipse_bin" => self.ellipse.bin_width = parse(key, value)?,
            "ellipse_vote_fraction" => self.ellipse.vote_fraction = parse(key, value)?,
            "ellipse_min_ratio" => self.ellipse.min_ratio = parse(key, value)?,
            "ellipse_max_ratio" => self.ellipse.max_ratio = parse(key, value)?,
            "detect_lids" => self.detect_lids = parse(key, value)?,
            "lid_tilt_range_deg" => self.parabola.tilt_range_deg = parse(key, value)?,
            "lid_tilt_bin_deg" => self.parabola.tilt_bin_deg = parse(key, value)?,
            "lid_d_bin" => self.parabola.d_bin = parse(key, value)?,
            "lid_d_min_ratio" => self.parabola.d_min_ratio = parse(key, value)?,
            "lid_d_max_ratio" => self.parabola.d_max_ratio = parse(key, value)?,
            "lid_band_ratio" => self.parabola.band_ratio = parse(key, value)?,
            "lid_vote_fraction" => self.parabola.vote_fraction = parse(key, value)?,
            "refine_fits" => self.refine_fits = parse(key, value)?,
            "refine_band" => self.refine_band = parse(key, value)?,
            "min_support" => self.encoder.min_support = parse(key, value)?,
            "max_occlusion" => self.encoder.max_occlusion = parse(key, value)?,
            "threshold" => self.matching.threshold = parse(key, value)?,
            "search_radius" => self.matching.search_radius = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "dark_limit" => self.pupil.dark_limit.to_string(),
            "pupil_margin" => self.pupil.margin.to_string(),
            "gradient_threshold" => self.gradient_threshold.to_string(),
            "edge_exclusion" => self.edge_exclusion.to_string(),
            "ellipse_theta_samples" => self.ellipse.theta_samples.to_string(),
            "ellipse_epsilon" => self.ellipse.epsilon.to_string(),
            "ellipse_bin" => self.ellipse.bin_width.to_string(),
            "ellipse_vote_fraction" => self.ellipse.vote_fraction.to_string(),
            "ellipse_min_ratio" => self.ellipse.min_ratio.to_string(),
            "ellipse_max_ratio" => self.ellipse.max_ratio.to_string(),
            "detect_lids" => self.detect_lids.to_string(),
            "lid_tilt_range_deg" => self.parabola.tilt_range_deg.to_string(),
            "lid_tilt_bin_deg" => self.parabola.tilt_bin_deg.to_string(),
            "lid_d_bin" => self.parabola.d_bin.to_string(),
            "lid_d_min_ratio" => self.parabola.d_min_ratio.to_string(),
            "lid_d_max_ratio" => self.parabola.d_max_ratio.to_string(),
            "lid_band_ratio" => self.parabola.band_ratio.to_string(),
            "lid_vote_fraction" => self.parabola.vote_fraction.to_string(),
            "refine_fits" => self.refine_fits.to_string(),
            "refine_band" => self.refine_band.to_string(),
            "min_support" => self.encoder.min_support.to_string(),
            "max_occlusion" => self.encoder.max_occlusion.to_string(),
            "threshold" => self.matching.threshold.to_string(),
            "search_radius" => self.matching.search_radius.to_string(),
            _ => return None,
        })
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k}={}\n", self.get(k).expect("listed key")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..=1.0).contains(&self.matching.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.encoder.min_support) || !(0.0..=1.0).contains(&self.encoder.max_occlusion) {
            return bad("min_support and max_occlusion must lie in [0, 1]");
        }
        if !(self.ellipse.bin_width > 0.0 && self.parabola.d_bin > 0.0 && self.parabola.tilt_bin_deg > 0.0) {
            return bad("bin widths must be positive");
        }
        if !(self.ellipse.min_ratio < self.ellipse.max_ratio && self.parabola.d_min_ratio < self.parabola.d_max_ratio) {
            return bad("search ranges must be non-empty");
        }
        if !(self.refine_band > 0.0) {
            return bad("refine band must be positive");
        }
        if self.ellipse.theta_samples == 0 || self.matching.search_radius < 0 {
            return bad("theta samples must be positive and search radius non-negative");
        }
        Ok(())
    }
}
