use std::collections::HashSet;

use super::window::Window;
use crate::error::{Error, Result};

/// Train / validation / test window collections.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Window>,
    pub val: Vec<Window>,
    pub test: Vec<Window>,
}

impl DatasetSplit {
    /// Test windows grouped by subject, in first-seen order.
    pub fn test_by_subject(&self) -> Vec<(String, Vec<&Window>)> {
        group_by_subject(&self.test)
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = HashSet::new();
        self.train
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .all(|w| seen.insert(w.key()))
    }
}

pub(crate) fn group_by_subject(windows: &[Window]) -> Vec<(String, Vec<&Window>)> {
    let mut groups: Vec<(String, Vec<&Window>)> = Vec::new();
    for w in windows {
        match groups.iter_mut().find(|(id, _)| *id == w.subject_id) {
            Some((_, list)) => list.push(w),
            None => groups.push((w.subject_id.clone(), vec![w])),
        }
    }
    groups
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitConfig {
    pub ratios: (f64, f64, f64),
    /// Drop val and test windows that share samples with a window kept in an
    /// earlier split.
    pub drop_boundary: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: (0.6, 0.2, 0.2),
            drop_boundary: true,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.ratios;
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::config("split.ratios", "ratios must be positive"));
        }
        if ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "split.ratios",
                format!("ratios must sum to 1, got {}", a + b + c),
            ));
        }
        Ok(())
    }
}

/// Per subject, assigns windows contiguously in temporal order: the first
/// `floor(r_train * n)` to train, the next `floor(r_val * n)` to val, the
/// remainder to test.
pub fn split_dataset(subjects: &[Vec<Window>], cfg: &SplitConfig) -> Result<DatasetSplit> {
    cfg.validate()?;
    let mut split = DatasetSplit::default();
    for windows in subjects {
        let n = windows.len();
        if n < 3 {
            let id = windows.first().map_or("<empty>", |w| w.subject_id.as_str());
            return Err(Error::InsufficientData(format!(
                "subject `{id}` has {n} windows, at least 3 are needed for a three-way split"
            )));
        }
        let mut ordered: Vec<&Window> = windows.iter().collect();
        ordered.sort_by_key(|w| w.start);

        // the epsilon absorbs products such as 0.29 * 100 = 28.999...
        let n_train = (cfg.ratios.0 * n as f64 + 1e-9).floor() as usize;
        let n_val = ((cfg.ratios.1 * n as f64 + 1e-9).floor() as usize).min(n - n_train);

        let (train, rest) = ordered.split_at(n_train);
        let (val, test) = rest.split_at(n_val);
        let end = |w: &Window| w.start + w.len();
        let after = |ws: &[&Window], boundary: usize| -> Vec<Window> {
            ws.iter()
                .filter(|w| !cfg.drop_boundary || w.start >= boundary)
                .map(|w| (*w).clone())
                .collect()
        };
        let train_end = train.last().map_or(0, |w| end(w));
        let val = after(val, train_end);
        let val_end = val.last().map_or(train_end, end).max(train_end);
        let test = after(test, val_end);
        split.train.extend(train.iter().map(|w| (*w).clone()));
        split.val.extend(val);
        split.test.extend(test);
    }
    Ok(split)
}
