use super::record::Record;
use crate::error::{Error, Result};

/// Linear-interpolation resampling. Output sample `i` is read at input
/// position `i * fs_in / fs_out`, clamped to the last input sample.
pub fn resample(signal: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    check_rates(fs_in, fs_out)?;
    if signal.is_empty() {
        return Ok(Vec::new());
    }
    if fs_in == fs_out {
        return Ok(signal.to_vec());
    }
    let out_len = (signal.len() as f64 * fs_out / fs_in).round() as usize;
    Ok(interpolate(signal, out_len, fs_in / fs_out))
}

/// Reads `signal` at positions `i * step`, `i in 0..out_len`, with linear interpolation.
pub(crate) fn interpolate(signal: &[f64], out_len: usize, step: f64) -> Vec<f64> {
    let last = signal.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = (i as f64 * step).min(last as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(last);
            let frac = pos - lo as f64;
            if frac == 0.0 {
                signal[lo]
            } else {
                signal[lo] + (signal[hi] - signal[lo]) * frac
            }
        })
        .collect()
}

/// Rescales annotation indices by `fs_out / fs_in`, clamping into the new
/// length and dropping indices that collapse onto their predecessor.
pub fn rescale_annotations(peaks: &[usize], fs_in: f64, fs_out: f64, new_len: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(peaks.len());
    if new_len == 0 {
        return out;
    }
    for &p in peaks {
        let q = ((p as f64 * fs_out / fs_in).round() as usize).min(new_len - 1);
        if out.last().is_none_or(|&prev| q > prev) {
            out.push(q);
        }
    }
    out
}

pub fn resample_record(record: &Record, fs_out: f64) -> Result<Record> {
    if record.fs == fs_out {
        return Ok(record.clone());
    }
    let scg = resample(&record.scg, record.fs, fs_out)?;
    let ecg = record
        .ecg
        .as_ref()
        .map(|e| resample(e, record.fs, fs_out))
        .transpose()?;
    let rpeaks = record
        .rpeaks
        .as_ref()
        .map(|p| rescale_annotations(p, record.fs, fs_out, scg.len()));
    Record::new(record.subject_id.clone(), fs_out, scg, ecg, rpeaks)
}

fn check_rates(fs_in: f64, fs_out: f64) -> Result<()> {
    if !(fs_in > 0.0 && fs_out > 0.0 && fs_in.is_finite() && fs_out.is_finite()) {
        return Err(Error::validation(format!(
            "sampling rates must be positive, got {fs_in} -> {fs_out}"
        )));
    }
    Ok(())
}
