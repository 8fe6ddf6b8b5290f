//! Calibration metrics: ECE over equal-width confidence bins, Brier score and
//! mean absolute error.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

pub const DEFAULT_BINS: usize = 10;

/// One equal-width confidence bin. Empty bins report zero means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_confidence: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub ece: f64,
    pub brier: f64,
    pub mae: f64,
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationReport {
    pub fn sample_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// ECE recomputed from the stored bins.
    pub fn ece_from_bins(&self) -> f64 {
        let n = self.sample_count() as f64;
        self.bins
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| b.count as f64 / n * (b.mean_confidence - b.mean_accuracy).abs())
            .sum()
    }
}

fn check_unit(name: &str, values: &[f64]) -> Result<()> {
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("{name}[{i}] = {v} outside [0, 1]")));
    }
    Ok(())
}

/// Bin index for confidence `c`; the last bin is closed on the right.
pub fn bin_index(c: f64, n_bins: usize) -> usize {
    ((c * n_bins as f64).floor() as usize).min(n_bins - 1)
}

/// Expected calibration error plus Brier and MAE of `confidence` against
/// `accuracy`, both in `[0, 1]`.
pub fn ece(confidence: &[f64], accuracy: &[f64], n_bins: usize) -> Result<CalibrationReport> {
    ensure_dim(confidence.len(), accuracy.len())?;
    if confidence.is_empty() {
        return Err(Error::invalid("calibration metrics need at least one sample"));
    }
    if n_bins == 0 {
        return Err(Error::invalid("n_bins must be at least 1"));
    }
    check_unit("confidence", confidence)?;
    check_unit("accuracy", accuracy)?;

    let mut sums = vec![(0usize, 0.0f64, 0.0f64); n_bins];
    for (&c, &a) in confidence.iter().zip(accuracy) {
        let s = &mut sums[bin_index(c, n_bins)];
        s.0 += 1;
        s.1 += c;
        s.2 += a;
    }
    let n = confidence.len() as f64;
    let bins: Vec<CalibrationBin> = sums
        .iter()
        .enumerate()
        .map(|(i, &(count, sc, sa))| CalibrationBin {
            lo: i as f64 / n_bins as f64,
            hi: (i + 1) as f64 / n_bins as f64,
            count,
            mean_confidence: if count > 0 { sc / count as f64 } else { 0.0 },
            mean_accuracy: if count > 0 { sa / count as f64 } else { 0.0 },
        })
        .collect();

    let brier = confidence
        .iter()
        .zip(accuracy)
        .map(|(c, a)| (c - a).powi(2))
        .sum::<f64>()
        / n;
    let mae = confidence.iter().zip(accuracy).map(|(c, a)| (c - a).abs()).sum::<f64>() / n;
    let mut report = CalibrationReport {
        ece: 0.0,
        brier,
        mae,
        bins,
    };
    report.ece = report.ece_from_bins();
    Ok(report)
}

/// Brier score against binary per-sample outcomes.
pub fn brier_binary(confidence: &[f64], correct: &[bool]) -> Result<f64> {
    ensure_dim(confidence.len(), correct.len())?;
    if confidence.is_empty() {
        return Err(Error::invalid("brier score needs at least one sample"));
    }
    check_unit("confidence", confidence)?;
    Ok(confidence
        .iter()
        .zip(correct)
        .map(|(c, &y)| (c - if y { 1.0 } else { 0.0 }).powi(2))
        .sum::<f64>()
        / confidence.len() as f64)
}
