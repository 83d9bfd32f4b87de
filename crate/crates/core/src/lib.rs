//! Iris recognition: segmentation, normalization, phase encoding and
//! matching of grayscale eye images, plus a synthetic eye generator.

pub mod encoding;
pub mod error;
pub mod hough;
pub mod imaging;
pub mod matching;
pub mod normalization;
pub mod pipeline;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result, Stage};
