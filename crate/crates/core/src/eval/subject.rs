use std::str::FromStr;

use super::hrv::{hrv_indices, nn_intervals, HrvIndices, HrvRow};
use super::matching::{match_peaks, MatchCounts, MatchRow, PeakMatchReport};
use super::valleys::{detect_valleys, ValleyParams};
use crate::error::{Error, Result};
use crate::model::SeismoNet;
use crate::nn::Real;
use crate::signal::{Record, Window, WindowSpec};

/// How detections in overlapping windows are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Counting {
    /// Each window is matched on its own and the counts summed, so a beat in
    /// two overlapping windows counts twice.
    PerWindow,
    /// Detections are mapped to record time and deduplicated first.
    #[default]
    Merged,
}

impl FromStr for Counting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => Ok(Counting::PerWindow),
            "merged" => Ok(Counting::Merged),
            other => Err(Error::config(
                "eval.counting",
                format!("expected `window` or `merged`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Counting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Counting::PerWindow => "window",
            Counting::Merged => "merged",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub tol_ms: f64,
    pub valleys: ValleyParams,
    pub counting: Counting,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tol_ms: 90.0,
            valleys: ValleyParams::default(),
            counting: Counting::Merged,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_ms > 0.0 && self.tol_ms.is_finite()) {
            return Err(Error::config("eval.tol_ms", "must be > 0"));
        }
        self.valleys.validate()
    }

    /// Sets one field from its key (with or without the `eval.` prefix).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let field = key.strip_prefix("eval.").unwrap_or(key);
        let full = format!("eval.{field}");
        let v = value.trim();
        let num = || {
            v.parse::<f64>()
                .map_err(|_| Error::config(&full, format!("expected a number, got `{value}`")))
        };
        match field {
            "tol_ms" => self.tol_ms = num()?,
            "min_prominence" => self.valleys.min_prominence = num()?,
            "refractory_ms" => self.valleys.refractory_ms = num()?,
            "smoothing" => {
                let w: usize = v.parse().map_err(|_| {
                    Error::config(
                        &full,
                        format!("expected an unsigned integer, got `{value}`"),
                    )
                })?;
                self.valleys.smoothing = (w > 1).then_some(w);
            }
            "counting" => self.counting = v.parse()?,
            _ => return Err(Error::config(full, "unknown eval key")),
        }
        Ok(())
    }
}

/// Sorts window-local detections into record time and drops any detection
/// closer than `min_gap` samples to the previous kept one.
pub fn merge_detections<'a>(
    per_window: impl IntoIterator<Item = (usize, &'a [usize])>,
    min_gap: f64,
) -> Vec<usize> {
    let mut all: Vec<usize> = per_window
        .into_iter()
        .flat_map(|(start, local)| local.iter().map(move |&p| start + p))
        .collect();
    all.sort_unstable();
    let mut kept: Vec<usize> = Vec::with_capacity(all.len());
    for p in all {
        match kept.last() {
            Some(&last) if ((p - last) as f64) < min_gap => {}
            _ => kept.push(p),
        }
    }
    kept
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectEvaluation {
    pub subject: String,
    /// Counts under the configured counting mode.
    pub counts: MatchCounts,
    pub per_window: MatchCounts,
    pub merged: MatchCounts,
    /// Merged detections in record samples.
    pub detected: Vec<usize>,
    /// Reference peaks covered by the windows, in record samples.
    pub actual: Vec<usize>,
    pub scg_hrv: Option<HrvIndices>,
    pub ecg_hrv: Option<HrvIndices>,
}

fn local_peaks(w: &Window) -> Result<&[usize]> {
    w.rpeaks_local.as_deref().ok_or_else(|| {
        Error::validation(format!(
            "window {}@{} has no reference peaks",
            w.subject_id, w.start
        ))
    })
}

/// Scores predictions for one subject's windows (in record order).
///
/// Reference peaks on a window's first or last sample cannot show up as a
/// strict interior valley and are left out of that window's reference set;
/// likewise for the two ends of the merged span.
pub fn evaluate_predictions(
    subject: &str,
    windows: &[&Window],
    preds: &[Vec<f64>],
    fs: f64,
    cfg: &EvalConfig,
) -> Result<SubjectEvaluation> {
    if windows.len() != preds.len() {
        return Err(Error::shape(format!(
            "{} windows but {} predictions",
            windows.len(),
            preds.len()
        )));
    }
    if windows.is_empty() {
        return Err(Error::Empty(format!("subject `{subject}` has no windows")));
    }
    let mut per_window = MatchCounts::default();
    let mut detections = Vec::with_capacity(windows.len());
    let mut reference = Vec::new();
    for (w, pred) in windows.iter().zip(preds) {
        if pred.len() != w.len() {
            return Err(Error::shape(format!(
                "prediction of length {} for a {}-sample window",
                pred.len(),
                w.len()
            )));
        }
        let local = local_peaks(w)?;
        let interior: Vec<usize> = local
            .iter()
            .copied()
            .filter(|&p| p > 0 && p + 1 < w.len())
            .collect();
        let det = detect_valleys(pred, fs, &cfg.valleys);
        per_window += match_peaks(&det, &interior, cfg.tol_ms, fs);
        reference.extend(local.iter().map(|&p| w.start + p));
        detections.push((w.start, det));
    }
    reference.sort_unstable();
    reference.dedup();

    let half_gap = cfg.valleys.refractory_samples(fs) / 2.0;
    let detected = merge_detections(detections.iter().map(|(s, d)| (*s, d.as_slice())), half_gap);
    let span_start = windows.iter().map(|w| w.start).min().unwrap();
    let span_last = windows.iter().map(|w| w.start + w.len()).max().unwrap() - 1;
    let actual: Vec<usize> = reference
        .iter()
        .copied()
        .filter(|&p| p > span_start && p < span_last)
        .collect();
    let merged = match_peaks(&detected, &actual, cfg.tol_ms, fs);

    let hrv = |peaks: &[usize]| nn_intervals(peaks, fs).and_then(|nn| hrv_indices(&nn)).ok();
    Ok(SubjectEvaluation {
        subject: subject.to_string(),
        counts: match cfg.counting {
            Counting::PerWindow => per_window,
            Counting::Merged => merged,
        },
        per_window,
        merged,
        scg_hrv: hrv(&detected),
        ecg_hrv: hrv(&reference),
        detected,
        actual,
    })
}

/// Evaluation of every subject in a window collection.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitEvaluation {
    pub subjects: Vec<SubjectEvaluation>,
}

impl SplitEvaluation {
    pub fn report(&self) -> PeakMatchReport {
        PeakMatchReport {
            rows: self
                .subjects
                .iter()
                .map(|s| MatchRow {
                    subject: s.subject.clone(),
                    counts: s.counts,
                })
                .collect(),
        }
    }

    /// SCG and ECG rows for every subject with enough peaks on both sides.
    pub fn hrv_rows(&self) -> Vec<HrvRow> {
        let mut rows = Vec::new();
        for s in &self.subjects {
            if let (Some(scg), Some(ecg)) = (s.scg_hrv, s.ecg_hrv) {
                rows.push(HrvRow {
                    subject: s.subject.clone(),
                    source: "scg".into(),
                    indices: scg,
                });
                rows.push(HrvRow {
                    subject: s.subject.clone(),
                    source: "ecg".into(),
                    indices: ecg,
                });
            }
        }
        rows
    }
}

/// Groups `windows` by subject (first-seen order), predicts each group with
/// `predict` and scores it.
pub fn evaluate_windows<F>(
    windows: &[Window],
    fs: f64,
    cfg: &EvalConfig,
    mut predict: F,
) -> Result<SplitEvaluation>
where
    F: FnMut(&[&Window]) -> Result<Vec<Vec<f64>>>,
{
    cfg.validate()?;
    let mut groups: Vec<(&str, Vec<&Window>)> = Vec::new();
    for w in windows {
        match groups.iter_mut().find(|(id, _)| *id == w.subject_id) {
            Some((_, list)) => list.push(w),
            None => groups.push((&w.subject_id, vec![w])),
        }
    }
    let mut subjects = Vec::with_capacity(groups.len());
    for (id, mut ws) in groups {
        ws.sort_by_key(|w| w.start);
        let preds = predict(&ws)?;
        subjects.push(evaluate_predictions(id, &ws, &preds, fs, cfg)?);
    }
    Ok(SplitEvaluation { subjects })
}

/// Predictions from a trained model, in chunks to bound memory.
pub fn model_predictions<T: Real>(
    model: &SeismoNet<T>,
    windows: &[&Window],
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(32) {
        let rows: Vec<&[f64]> = chunk.iter().map(|w| w.scg_seg.as_slice()).collect();
        out.extend(model.predict(&rows)?);
    }
    Ok(out)
}

pub fn evaluate_model<T: Real>(
    model: &SeismoNet<T>,
    windows: &[Window],
    fs: f64,
    cfg: &EvalConfig,
) -> Result<SplitEvaluation> {
    evaluate_windows(windows, fs, cfg, |ws| model_predictions(model, ws))
}

/// Picks the valley prominence threshold from `candidates` that maximises F1
/// of the matched peaks on `windows` (meant to be the validation split).
/// Ties go to the smaller threshold. Predictions are computed once.
pub fn tune_prominence<T: Real>(
    model: &SeismoNet<T>,
    windows: &[Window],
    fs: f64,
    cfg: &EvalConfig,
    candidates: &[f64],
) -> Result<(f64, MatchCounts)> {
    if candidates.is_empty() {
        return Err(Error::validation("no prominence candidates"));
    }
    let mut cache: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut best: Option<(f64, MatchCounts, f64)> = None;
    for &prom in candidates {
        let mut trial = cfg.clone();
        trial.valleys.min_prominence = prom;
        let mut call = 0;
        let ev = evaluate_windows(windows, fs, &trial, |ws| {
            if call == cache.len() {
                cache.push(model_predictions(model, ws)?);
            }
            call += 1;
            Ok(cache[call - 1].clone())
        })?;
        let total = ev.report().total();
        let f1 = f1_score(&total);
        if best.as_ref().is_none_or(|(_, _, b)| f1 > *b) {
            best = Some((prom, total, f1));
        }
    }
    let (prom, counts, _) = best.expect("non-empty candidates");
    Ok((prom, counts))
}

fn f1_score(c: &MatchCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * c.tp as f64 / denom as f64
    }
}

/// Model output for every window of a record and the merged peak list.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordInference {
    /// `(start, predicted transform)` per window.
    pub windows: Vec<(usize, Vec<f64>)>,
    /// Strictly increasing detections in record samples.
    pub peaks: Vec<usize>,
}

pub fn infer_record<T: Real>(
    model: &SeismoNet<T>,
    record: &Record,
    spec: &WindowSpec,
    valleys: &ValleyParams,
) -> Result<RecordInference> {
    valleys.validate()?;
    let windows = spec.segment(record)?;
    let refs: Vec<&Window> = windows.iter().collect();
    let preds = model_predictions(model, &refs)?;
    let dets: Vec<Vec<usize>> = preds
        .iter()
        .map(|p| detect_valleys(p, record.fs, valleys))
        .collect();
    let peaks = merge_detections(
        windows
            .iter()
            .zip(&dets)
            .map(|(w, d)| (w.start, d.as_slice())),
        valleys.refractory_samples(record.fs) / 2.0,
    );
    Ok(RecordInference {
        windows: windows.iter().map(|w| w.start).zip(preds).collect(),
        peaks,
    })
}

/// Selects one HRV index by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HrvIndex {
    MeanNn,
    Sdnn,
    Rmssd,
    Pnn50,
}

impl HrvIndex {
    pub const ALL: [HrvIndex; 4] = [
        HrvIndex::MeanNn,
        HrvIndex::Sdnn,
        HrvIndex::Rmssd,
        HrvIndex::Pnn50,
    ];

    pub fn of(self, h: &HrvIndices) -> f64 {
        match self {
            HrvIndex::MeanNn => h.mean_nn_ms,
            HrvIndex::Sdnn => h.sdnn_ms,
            HrvIndex::Rmssd => h.rmssd_ms,
            HrvIndex::Pnn50 => h.pnn50,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HrvIndex::MeanNn => "mean_nn",
            HrvIndex::Sdnn => "sdnn",
            HrvIndex::Rmssd => "rmssd",
            HrvIndex::Pnn50 => "pnn50",
        }
    }
}

impl FromStr for HrvIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HrvIndex::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown HRV index `{s}` (mean_nn, sdnn, rmssd, pnn50)"
                ))
            })
    }
}

/// `(scg, ecg)` value pairs of one index, one per subject present in both sources.
pub fn subject_pairs(rows: &[HrvRow], index: HrvIndex) -> Vec<(String, f64, f64)> {
    let mut out = Vec::new();
    for r in rows.iter().filter(|r| r.source == "scg") {
        if let Some(e) = rows
            .iter()
            .find(|e| e.source == "ecg" && e.subject == r.subject)
        {
            out.push((
                r.subject.clone(),
                index.of(&r.indices),
                index.of(&e.indices),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{distance_transform_f64, synth_record, SynthParams};

    #[test]
    fn merge_keeps_first_of_close_detections() {
        let a = [10usize, 40];
        let b = [5usize, 36];
        let m = merge_detections([(0, &a[..]), (4, &b[..])], 3.0);
        assert_eq!(m, vec![9, 40]);
    }

    fn exact(ws: &[&Window]) -> Result<Vec<Vec<f64>>> {
        Ok(ws.iter().map(|w| w.target_dt.clone().unwrap()).collect())
    }

    #[test]
    fn exact_transform_scores_perfectly() {
        let rec = synth_record(&SynthParams {
            fs: 100.0,
            duration_s: 40.0,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let windows: Vec<Window> = WindowSpec {
            w_sec: 2.0,
            hop_sec: 1.0,
            dt_clip: None,
        }
        .segment(&rec)
        .unwrap()
        .into_iter()
        .filter(Window::is_labeled)
        .collect();
        for counting in [Counting::PerWindow, Counting::Merged] {
            let cfg = EvalConfig {
                counting,
                ..Default::default()
            };
            let ev = evaluate_windows(&windows, 100.0, &cfg, exact).unwrap();
            let t = ev.report().total();
            assert!(t.tp > 0);
            assert_eq!(
                (t.sensitivity(), t.ppv()),
                (Some(1.0), Some(1.0)),
                "{counting}"
            );
        }
    }

    #[test]
    fn rows_are_consistent() {
        let peaks = vec![20, 60];
        let w = Window {
            subject_id: "s".into(),
            start: 0,
            scg_seg: vec![0.0; 100],
            target_dt: Some(distance_transform_f64(&peaks, 100, None).unwrap()),
            rpeaks_local: Some(peaks),
        };
        let mut pred = w.target_dt.clone().unwrap();
        pred[90] = -5.0;
        let ev = evaluate_predictions("s", &[&w], &[pred], 100.0, &EvalConfig::default()).unwrap();
        assert_eq!(
            ev.counts,
            MatchCounts {
                tp: 2,
                fp: 1,
                fn_: 0
            }
        );
        assert_eq!(ev.counts.detected(), ev.counts.tp + ev.counts.fp);
    }

    #[test]
    fn index_names_parse() {
        for i in HrvIndex::ALL {
            assert_eq!(i.name().parse::<HrvIndex>().unwrap(), i);
        }
        assert!("lf_hf".parse::<HrvIndex>().is_err());
    }
}
