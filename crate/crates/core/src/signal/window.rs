use super::record::Record;
use super::transform::distance_transform_f64;
use crate::error::{Error, Result};

/// A fixed-length slice of a record with its optional labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub subject_id: String,
    pub start: usize,
    pub scg_seg: Vec<f64>,
    /// Distance to the nearest in-window R-peak, in samples.
    pub target_dt: Option<Vec<f64>>,
    pub rpeaks_local: Option<Vec<usize>>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.scg_seg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scg_seg.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.target_dt.is_some()
    }

    /// Key used to check that dataset splits are disjoint.
    pub fn key(&self) -> (&str, usize) {
        (&self.subject_id, self.start)
    }
}

/// Window length and hop in seconds, plus an optional cap on target values.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSpec {
    pub w_sec: f64,
    pub hop_sec: f64,
    pub dt_clip: Option<f64>,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            w_sec: 10.0,
            hop_sec: 5.0,
            dt_clip: None,
        }
    }
}

impl WindowSpec {
    /// Window and hop lengths in samples at `fs`.
    pub fn samples(&self, fs: f64) -> Result<(usize, usize)> {
        let w = whole_samples(self.w_sec, fs, "window.w_sec")?;
        let hop = whole_samples(self.hop_sec, fs, "window.hop_sec")?;
        Ok((w, hop))
    }

    pub fn segment(&self, record: &Record) -> Result<Vec<Window>> {
        let (w, hop) = self.samples(record.fs)?;
        let len = record.len();
        if len < w {
            return Err(Error::Empty(format!(
                "record `{}` has {len} samples, shorter than one {w}-sample window",
                record.subject_id
            )));
        }
        let count = (len - w) / hop + 1;
        let mut windows = Vec::with_capacity(count);
        for k in 0..count {
            let start = k * hop;
            let end = start + w;
            let rpeaks_local = record.rpeaks.as_ref().map(|peaks| {
                let from = peaks.partition_point(|&p| p < start);
                let to = peaks.partition_point(|&p| p < end);
                peaks[from..to]
                    .iter()
                    .map(|&p| p - start)
                    .collect::<Vec<_>>()
            });
            let target_dt = match &rpeaks_local {
                Some(local) if !local.is_empty() => {
                    Some(distance_transform_f64(local, w, self.dt_clip)?)
                }
                _ => None,
            };
            windows.push(Window {
                subject_id: record.subject_id.clone(),
                start,
                scg_seg: record.scg[start..end].to_vec(),
                target_dt,
                rpeaks_local,
            });
        }
        Ok(windows)
    }
}

/// Cuts `record` into windows at starts `0, hop, 2*hop, ...` while the window fits.
pub fn segment_windows(record: &Record, w_sec: f64, hop_sec: f64) -> Result<Vec<Window>> {
    WindowSpec {
        w_sec,
        hop_sec,
        dt_clip: None,
    }
    .segment(record)
}

fn whole_samples(seconds: f64, fs: f64, key: &str) -> Result<usize> {
    let n = seconds * fs;
    let rounded = n.round();
    if rounded.is_nan() || rounded < 1.0 || (n - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(Error::config(
            key,
            format!("{seconds} s at {fs} Hz is not a positive whole number of samples"),
        ));
    }
    Ok(rounded as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp_record(seconds: f64, fs: f64) -> Record {
        let n = (seconds * fs) as usize;
        let scg = (0..n).map(|i| i as f64).collect();
        Record::new("r", fs, scg, None, None).unwrap()
    }

    #[test]
    fn sixty_seconds_gives_eleven_windows() {
        let rec = ramp_record(60.0, 50.0);
        assert_eq!(segment_windows(&rec, 10.0, 5.0).unwrap().len(), 11);
    }

    #[test]
    fn exact_fit_gives_single_window() {
        let rec = ramp_record(10.0, 50.0);
        let w = segment_windows(&rec, 10.0, 5.0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start, 0);
    }

    #[test]
    fn short_record_is_empty_error() {
        let rec = ramp_record(9.0, 50.0);
        assert!(matches!(
            segment_windows(&rec, 10.0, 5.0),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn fractional_window_is_rejected() {
        let rec = ramp_record(20.0, 3.0);
        assert!(segment_windows(&rec, 0.5, 0.5).is_err());
    }

    #[test]
    fn overlapping_windows_reassemble_the_stream() {
        let rec = ramp_record(20.0, 100.0);
        let windows = segment_windows(&rec, 10.0, 5.0).unwrap();
        let hop = 500;
        let mut rebuilt = windows[0].scg_seg.clone();
        for w in &windows[1..] {
            rebuilt.extend_from_slice(&w.scg_seg[w.len() - hop..]);
        }
        assert_eq!(rebuilt, rec.scg);
    }

    #[test]
    fn labels_are_local() {
        let mut rec = ramp_record(4.0, 10.0);
        rec.rpeaks = Some(vec![3, 12, 25, 38]);
        let windows = segment_windows(&rec, 2.0, 1.0).unwrap();
        assert_eq!(windows[1].start, 10);
        assert_eq!(windows[1].rpeaks_local.as_deref(), Some(&[2, 15][..]));
        let dt = windows[1].target_dt.as_ref().unwrap();
        assert_eq!(dt[2], 0.0);
        assert_eq!(dt[15], 0.0);
        assert_eq!(dt[0], 2.0);
    }

    #[test]
    fn window_without_peaks_is_unlabeled() {
        let mut rec = ramp_record(4.0, 10.0);
        rec.rpeaks = Some(vec![3]);
        let windows = segment_windows(&rec, 2.0, 1.0).unwrap();
        assert!(windows[0].is_labeled());
        assert!(!windows[1].is_labeled());
        assert_eq!(windows[1].rpeaks_local.as_deref(), Some(&[][..]));
    }

    proptest! {
        #[test]
        fn window_count_formula(len in 1usize..2000, w in 1usize..300, hop in 1usize..300) {
            prop_assume!(len >= w);
            let rec = Record::new("p", 1.0, vec![0.0; len], None, None).unwrap();
            let windows = segment_windows(&rec, w as f64, hop as f64).unwrap();
            prop_assert_eq!(windows.len(), (len - w) / hop + 1);
            prop_assert!(windows.iter().all(|win| win.len() == w && win.start + w <= len));
        }
    }
}
