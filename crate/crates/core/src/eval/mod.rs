//! R-peak detection from predicted transforms, detection scoring, HRV
//! indices and Bland-Altman agreement.

mod agreement;
mod hrv;
mod matching;
mod subject;
mod valleys;

pub use agreement::{bland_altman, BlandAltmanStats, LOA_Z};
pub use hrv::{
    hrv_csv, hrv_indices, nn_intervals, parse_hrv_csv, pooled_hrv_indices, HrvIndices, HrvRow,
};
pub use matching::{
    format_metric, match_peaks, ppv, sensitivity, MatchCounts, MatchRow, PeakMatchReport,
};
pub use subject::{
    evaluate_model, evaluate_predictions, evaluate_windows, infer_record, merge_detections,
    model_predictions, subject_pairs, tune_prominence, Counting, EvalConfig, HrvIndex,
    RecordInference, SplitEvaluation, SubjectEvaluation,
};
pub use valleys::{detect_valleys, moving_average, valley_prominence, ValleyParams};
