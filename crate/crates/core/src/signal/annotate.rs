/// Minimal R-peak annotator for ECG streams.
///
/// Envelope = centered moving integral of the squared central difference.
/// Local envelope maxima are accepted against a running signal/noise
/// threshold with a 200 ms refractory period, then snapped to the ECG
/// maximum nearby.
pub fn annotate_ecg_rpeaks(ecg: &[f64], fs: f64) -> Vec<usize> {
    let n = ecg.len();
    if n < 3 || fs <= 0.0 {
        return Vec::new();
    }
    let env = envelope(ecg, fs);
    let init_len = ((2.0 * fs) as usize).clamp(1, n);
    let init_max = env[..init_len].iter().copied().fold(0.0, f64::max);
    if init_max <= 0.0 {
        return Vec::new();
    }
    let mut spk = 0.5 * init_max;
    let mut npk = env[..init_len].iter().sum::<f64>() / init_len as f64;

    let refractory = ((0.2 * fs).round() as usize).max(1);
    let mut accepted: Vec<(usize, f64)> = Vec::new();
    for i in 1..n - 1 {
        let v = env[i];
        if !(v > env[i - 1] && v >= env[i + 1]) {
            continue;
        }
        let threshold = npk + 0.25 * (spk - npk);
        if v <= threshold {
            npk = 0.125 * v + 0.875 * npk;
            continue;
        }
        match accepted.last_mut() {
            Some(last) if i - last.0 < refractory => {
                if v > last.1 {
                    *last = (i, v);
                }
            }
            _ => accepted.push((i, v)),
        }
        spk = 0.125 * v + 0.875 * spk;
    }

    let search = ((0.075 * fs).round() as usize).max(1);
    let mut peaks: Vec<usize> = Vec::with_capacity(accepted.len());
    for (i, _) in accepted {
        let lo = i.saturating_sub(search);
        let hi = (i + search + 1).min(n);
        let best = (lo..hi)
            .max_by(|&a, &b| ecg[a].total_cmp(&ecg[b]).then(b.cmp(&a)))
            .unwrap_or(i);
        if peaks.last().is_none_or(|&prev| best > prev) {
            peaks.push(best);
        }
    }
    peaks
}

fn envelope(ecg: &[f64], fs: f64) -> Vec<f64> {
    let n = ecg.len();
    let squared: Vec<f64> = (0..n)
        .map(|i| {
            let d = ecg[(i + 1).min(n - 1)] - ecg[i.saturating_sub(1)];
            d * d
        })
        .collect();
    let half = ((0.075 * fs) as usize).max(1);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in &squared {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}
