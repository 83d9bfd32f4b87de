//! Genuine/impostor score histograms and the decision threshold at their
//! crossing.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 100;
pub const MIN_SCORES: usize = 30;

/// Counts over `[k/100, (k+1)/100)`; a score of exactly 1 lands in the
/// last bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreHistogram {
    pub genuine: Vec<u64>,
    pub impostor: Vec<u64>,
}

fn bin_of(score: f64) -> usize {
    ((score * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

impl ScoreHistogram {
    pub fn from_scores(genuine: &[f64], impostor: &[f64]) -> Self {
        let fill = |scores: &[f64]| {
            let mut bins = vec![0u64; HISTOGRAM_BINS];
            for &s in scores {
                bins[bin_of(s)] += 1;
            }
            bins
        };
        Self {
            genuine: fill(genuine),
            impostor: fill(impostor),
        }
    }

    /// `bin_low,genuine_count,impostor_count` rows under a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low,genuine_count,impostor_count\n");
        for k in 0..HISTOGRAM_BINS {
            writeln!(s, "{:.2},{},{}", k as f64 / HISTOGRAM_BINS as f64, self.genuine[k], self.impostor[k])
                .expect("write to string");
        }
        s
    }

    /// Scanning right from the genuine mode, `k1` is the first bin where the
    /// genuine count drops below the impostor count and `k0` the last bin
    /// before it where genuine still dominates. The threshold is the
    /// midpoint of `[upper edge of k0, upper edge of k1]`, which is the
    /// midpoint of `k1` when the two are adjacent.
    pub fn crossing(&self) -> Option<f64> {
        let (g, i) = (&self.genuine, &self.impostor);
        let mode = (0..HISTOGRAM_BINS).max_by_key(|&k| (g[k], std::cmp::Reverse(k)))?;
        let k1 = (mode..HISTOGRAM_BINS).find(|&k| g[k] < i[k])?;
        let k0 = (mode..k1).rev().find(|&k| g[k] > i[k]).unwrap_or(mode);
        Some(((k0 + 1) + (k1 + 1)) as f64 / (2 * HISTOGRAM_BINS) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub threshold: f64,
    pub histogram: ScoreHistogram,
    pub genuine_mean: f64,
    pub impostor_mean: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn calibrate_threshold(genuine: &[f64], impostor: &[f64]) -> Result<Calibration> {
    if genuine.len() < MIN_SCORES || impostor.len() < MIN_SCORES {
        return Err(Error::TooFewScores {
            genuine: genuine.len(),
            impostor: impostor.len(),
        });
    }
    let (genuine_mean, impostor_mean) = (mean(genuine), mean(impostor));
    if genuine_mean >= impostor_mean {
        return Err(Error::NoSeparation);
    }
    let histogram = ScoreHistogram::from_scores(genuine, impostor);
    let threshold = histogram.crossing().ok_or(Error::NoSeparation)?;
    Ok(Calibration {
        threshold,
        histogram,
        genuine_mean,
        impostor_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Inverse normal CDF by bisection, for deterministic quantile samples.
    fn normal_quantile(p: f64) -> f64 {
        let cdf = |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    // Abramowitz-Stegun 7.1.26
    fn erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
        let y = 1.0
            - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736) * t + 0.254_829_592)
                * t
                * (-x * x).exp();
        if x >= 0.0 {
            y
        } else {
            -y
        }
    }

    fn gaussian_scores(mu: f64, sigma: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| mu + sigma * normal_quantile((k as f64 + 0.5) / n as f64)).collect()
    }

    #[test]
    fn disjoint_masses() {
        let c = calibrate_threshold(&[0.1; 40], &[0.5; 40]).unwrap();
        assert!(c.threshold > 0.1 && c.threshold < 0.5, "{}", c.threshold);
        assert_eq!(c.histogram.genuine[10], 40);
        assert_eq!(c.histogram.impostor[50], 40);
    }

    #[test]
    fn adjacent_crossing_is_bin_midpoint() {
        let mut h = ScoreHistogram::from_scores(&[], &[]);
        h.genuine[20] = 10;
        h.genuine[21] = 5;
        h.impostor[21] = 1;
        h.impostor[22] = 9;
        h.genuine[22] = 2;
        assert!((h.crossing().unwrap() - 0.225).abs() < 1e-12);
    }

    #[test]
    fn gaussian_crossing() {
        let g = gaussian_scores(0.2, 0.05, 20_000);
        let i = gaussian_scores(0.5, 0.05, 20_000);
        let c = calibrate_threshold(&g, &i).unwrap();
        assert!((c.threshold - 0.35).abs() <= 0.03, "{}", c.threshold);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(calibrate_threshold(&[0.1; 29], &[0.5; 40]), Err(Error::TooFewScores { .. })));
        assert!(matches!(calibrate_threshold(&[0.5; 40], &[0.1; 40]), Err(Error::NoSeparation)));
        assert!(matches!(calibrate_threshold(&[0.3; 40], &[0.3; 40]), Err(Error::NoSeparation)));
    }

    #[test]
    fn csv_layout() {
        let h = ScoreHistogram::from_scores(&[0.0, 0.005, 1.0], &[0.5]);
        let csv = h.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 101);
        assert_eq!(lines[0], "bin_low,genuine_count,impostor_count");
        assert_eq!(lines[1], "0.00,2,0");
        assert_eq!(lines[51], "0.50,0,1");
        assert_eq!(lines[100], "0.99,1,0");
    }
}
