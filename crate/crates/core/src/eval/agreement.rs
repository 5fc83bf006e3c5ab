use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Limits-of-agreement multiplier for a 95% interval.
pub const LOA_Z: f64 = 1.96;

#[derive(Clone, Debug, PartialEq)]
pub struct BlandAltmanStats {
    pub mean_diff: f64,
    /// Sample standard deviation of the differences.
    pub sd_diff: f64,
    /// `1.96 * sd_diff`.
    pub half_width: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub loa_range: f64,
    /// `(mean, diff)` per pair.
    pub points: Vec<(f64, f64)>,
    /// Indices of pairs whose difference lies outside the limits.
    pub outliers: Vec<usize>,
}

/// Agreement between paired measurements `(a, b)`; differences are `a - b`.
pub fn bland_altman(pairs: &[(f64, f64)]) -> Result<BlandAltmanStats> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::validation("paired values must be finite"));
    }
    let points: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| ((a + b) / 2.0, a - b)).collect();
    let n = points.len() as f64;
    let mean_diff = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sd_diff = (points
        .iter()
        .map(|p| (p.1 - mean_diff).powi(2))
        .sum::<f64>()
        / (n - 1.0))
        .sqrt();
    let half_width = LOA_Z * sd_diff;
    let loa_low = mean_diff - half_width;
    let loa_high = mean_diff + half_width;
    let outliers = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1 < loa_low || p.1 > loa_high)
        .map(|(i, _)| i)
        .collect();
    Ok(BlandAltmanStats {
        mean_diff,
        sd_diff,
        half_width,
        loa_low,
        loa_high,
        loa_range: loa_high - loa_low,
        points,
        outliers,
    })
}

impl BlandAltmanStats {
    /// `index,mean,diff` rows followed by a `#` summary line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,mean,diff\n");
        for (i, (m, d)) in self.points.iter().enumerate() {
            let _ = writeln!(out, "{i},{m},{d}");
        }
        let _ = writeln!(
            out,
            "# mean_diff={} sd_diff={} loa_low={} loa_high={} loa_range={} outliers={}",
            self.mean_diff,
            self.sd_diff,
            self.loa_low,
            self.loa_high,
            self.loa_range,
            self.outliers.len()
        );
        out
    }
}
