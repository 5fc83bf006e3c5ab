use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Time-domain HRV indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HrvIndices {
    pub mean_nn_ms: f64,
    /// Sample standard deviation (divisor n - 1).
    pub sdnn_ms: f64,
    pub rmssd_ms: f64,
    /// Fraction of successive differences above 50 ms.
    pub pnn50: f64,
}

/// Successive peak differences in milliseconds.
pub fn nn_intervals(peaks: &[usize], fs: f64) -> Result<Vec<f64>> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 peaks for intervals, got {}",
            peaks.len()
        )));
    }
    if let Some(w) = peaks.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::validation(format!(
            "peaks must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(peaks
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 * 1000.0 / fs)
        .collect())
}

pub fn hrv_indices(nn: &[f64]) -> Result<HrvIndices> {
    if nn.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 intervals, got {}",
            nn.len()
        )));
    }
    if nn.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("intervals must be finite"));
    }
    let n = nn.len() as f64;
    let mean = nn.iter().sum::<f64>() / n;
    let var = nn.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let diffs: Vec<f64> = nn.windows(2).map(|w| w[1] - w[0]).collect();
    let m = diffs.len() as f64;
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / m).sqrt();
    let over = diffs.iter().filter(|d| d.abs() > 50.0).count();
    Ok(HrvIndices {
        mean_nn_ms: mean,
        sdnn_ms: var.sqrt(),
        rmssd_ms: rmssd,
        pnn50: over as f64 / m,
    })
}

/// Indices over several interval series at once: mean and SDNN over every
/// interval, RMSSD and pNN50 over successive differences within each series.
pub fn pooled_hrv_indices(series: &[Vec<f64>]) -> Result<HrvIndices> {
    let all: Vec<f64> = series.iter().flatten().copied().collect();
    let diffs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.windows(2).map(|w| w[1] - w[0]))
        .collect();
    if all.len() < 2 || diffs.is_empty() {
        return Err(Error::InsufficientData(
            "not enough intervals to pool".into(),
        ));
    }
    let base = hrv_indices(&all)?;
    let m = diffs.len() as f64;
    Ok(HrvIndices {
        rmssd_ms: (diffs.iter().map(|d| d * d).sum::<f64>() / m).sqrt(),
        pnn50: diffs.iter().filter(|d| d.abs() > 50.0).count() as f64 / m,
        ..base
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HrvRow {
    pub subject: String,
    /// `scg` or `ecg`.
    pub source: String,
    pub indices: HrvIndices,
}

pub fn hrv_csv(rows: &[HrvRow]) -> String {
    let mut out = String::from("subject,source,mean_nn_ms,sdnn_ms,rmssd_ms,pnn50\n");
    for r in rows {
        let i = r.indices;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.subject, r.source, i.mean_nn_ms, i.sdnn_ms, i.rmssd_ms, i.pnn50
        );
    }
    out
}

/// Parses the output of [`hrv_csv`].
pub fn parse_hrv_csv(text: &str) -> Result<Vec<HrvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "subject,source,mean_nn_ms,sdnn_ms,rmssd_ms,pnn50" => {}
        _ => {
            return Err(Error::validation(
                "HRV file must start with the HRV CSV header",
            ))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::validation(format!("HRV file line {}: malformed row `{line}`", i + 1));
        if f.len() != 6 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        rows.push(HrvRow {
            subject: f[0].to_string(),
            source: f[1].to_string(),
            indices: HrvIndices {
                mean_nn_ms: num(f[2])?,
                sdnn_ms: num(f[3])?,
                rmssd_ms: num(f[4])?,
                pnn50: num(f[5])?,
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intervals_in_milliseconds() {
        assert_eq!(
            nn_intervals(&[0, 500, 1000], 500.0).unwrap(),
            vec![1000.0, 1000.0]
        );
        assert!(nn_intervals(&[0, 500, 400], 500.0).is_err());
        assert!(nn_intervals(&[3], 500.0).is_err());
    }

    #[test]
    fn worked_example() {
        let h = hrv_indices(&[800.0, 860.0, 865.0, 920.0]).unwrap();
        assert_eq!(h.mean_nn_ms, 861.25);
        assert_eq!(h.pnn50, 2.0 / 3.0);
        assert!((h.rmssd_ms - ((3600.0f64 + 25.0 + 3025.0) / 3.0).sqrt()).abs() < 1e-12);
        assert!((h.rmssd_ms - 47.08).abs() < 0.005);
    }

    #[test]
    fn constant_intervals_have_no_variability() {
        let h = hrv_indices(&[900.0; 5]).unwrap();
        assert_eq!((h.sdnn_ms, h.rmssd_ms, h.pnn50), (0.0, 0.0, 0.0));
    }

    #[test]
    fn pooling_ignores_series_boundaries() {
        let p = pooled_hrv_indices(&[vec![800.0, 800.0], vec![1000.0, 1000.0]]).unwrap();
        assert_eq!(p.rmssd_ms, 0.0);
        assert_eq!(p.mean_nn_ms, 900.0);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![HrvRow {
            subject: "s1".into(),
            source: "scg".into(),
            indices: hrv_indices(&[800.0, 860.0, 865.0, 920.0]).unwrap(),
        }];
        assert_eq!(parse_hrv_csv(&hrv_csv(&rows)).unwrap(), rows);
    }
}
