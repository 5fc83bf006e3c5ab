//! Records, synthetic data, R-peak annotation, windowing and dataset splits.

mod annotate;
mod record;
mod resample;
mod split;
mod synth;
mod transform;
mod window;

pub use annotate::annotate_ecg_rpeaks;
pub use record::{
    annotation_path, load_annotations, load_record, validate_annotations, write_annotations,
    write_record, Record,
};
pub use resample::{resample, resample_record, rescale_annotations};
pub use split::{split_dataset, DatasetSplit, SplitConfig};
pub use synth::{synth_record, SynthParams};
pub use transform::{distance_transform, distance_transform_f64};
pub use window::{segment_windows, Window, WindowSpec};

use crate::error::Result;

/// Windows every record and keeps only the labeled windows, one collection
/// per subject. Windows without any R-peak have no defined target.
pub fn labeled_windows(records: &[Record], spec: &WindowSpec) -> Result<Vec<Vec<Window>>> {
    records
        .iter()
        .map(|r| {
            Ok(spec
                .segment(r)?
                .into_iter()
                .filter(Window::is_labeled)
                .collect())
        })
        .collect()
}

/// Windowing followed by a per-subject contiguous split.
pub fn build_dataset(
    records: &[Record],
    spec: &WindowSpec,
    split: &SplitConfig,
) -> Result<DatasetSplit> {
    split_dataset(&labeled_windows(records, spec)?, split)
}
