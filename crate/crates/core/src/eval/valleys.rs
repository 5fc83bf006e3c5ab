use crate::error::{Error, Result};

/// Valley-picking parameters for predicted distance transforms.
#[derive(Clone, Debug, PartialEq)]
pub struct ValleyParams {
    /// Minimum depth below the lower of the two surrounding ridges, in DT units (samples).
    pub min_prominence: f64,
    /// Minimum gap between two detections.
    pub refractory_ms: f64,
    /// Centered moving-average width in samples; `None` or 1 disables it.
    pub smoothing: Option<usize>,
}

impl Default for ValleyParams {
    fn default() -> Self {
        ValleyParams {
            min_prominence: 0.0,
            refractory_ms: 200.0,
            smoothing: None,
        }
    }
}

impl ValleyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.refractory_ms > 0.0 && self.refractory_ms.is_finite()) {
            return Err(Error::config("eval.refractory_ms", "must be > 0"));
        }
        if !(self.min_prominence >= 0.0 && self.min_prominence.is_finite()) {
            return Err(Error::config("eval.min_prominence", "must be >= 0"));
        }
        if self.smoothing == Some(0) {
            return Err(Error::config("eval.smoothing", "width must be >= 1"));
        }
        Ok(())
    }

    /// Refractory period in samples at `fs`.
    pub fn refractory_samples(&self, fs: f64) -> f64 {
        self.refractory_ms * fs / 1000.0
    }
}

/// Centered moving average; the window is truncated at the edges.
pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return x.to_vec();
    }
    let left = (width - 1) / 2;
    let right = width - 1 - left;
    let mut prefix = vec![0.0; x.len() + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..x.len())
        .map(|i| {
            let a = i.saturating_sub(left);
            let b = (i + right + 1).min(x.len());
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

/// Depth of the valley at `i` below the lower of its two bounding ridges.
/// Each ridge is the highest point reached before the signal drops below
/// `x[i]` again, or before the edge.
pub fn valley_prominence(x: &[f64], i: usize) -> f64 {
    let v = x[i];
    let mut left = v;
    for &y in x[..i].iter().rev() {
        if y < v {
            break;
        }
        left = left.max(y);
    }
    let mut right = v;
    for &y in &x[i + 1..] {
        if y < v {
            break;
        }
        right = right.max(y);
    }
    left.min(right) - v
}

/// Sorted indices of strict interior local minima with enough prominence,
/// thinned so that no two are closer than the refractory period (the deeper
/// valley wins, earlier index on ties).
pub fn detect_valleys(signal: &[f64], fs: f64, params: &ValleyParams) -> Vec<usize> {
    if signal.len() < 3 {
        return Vec::new();
    }
    let smoothed;
    let x = match params.smoothing {
        Some(w) if w > 1 => {
            smoothed = moving_average(signal, w);
            &smoothed[..]
        }
        _ => signal,
    };
    let mut candidates: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| x[i] < x[i - 1] && x[i] < x[i + 1])
        .filter(|&i| valley_prominence(x, i) >= params.min_prominence)
        .collect();
    candidates.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let gap = params.refractory_samples(fs);
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| (c.abs_diff(k) as f64) >= gap) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}
