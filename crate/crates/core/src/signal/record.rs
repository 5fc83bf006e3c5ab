use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One subject's synchronized SCG/ECG streams.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub subject_id: String,
    pub fs: f64,
    pub scg: Vec<f64>,
    pub ecg: Option<Vec<f64>>,
    pub rpeaks: Option<Vec<usize>>,
}

impl Record {
    pub fn new(
        subject_id: impl Into<String>,
        fs: f64,
        scg: Vec<f64>,
        ecg: Option<Vec<f64>>,
        rpeaks: Option<Vec<usize>>,
    ) -> Result<Self> {
        let record = Record {
            subject_id: subject_id.into(),
            fs,
            scg,
            ecg,
            rpeaks,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn len(&self) -> usize {
        self.scg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scg.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::validation(format!(
                "sampling rate must be positive, got {}",
                self.fs
            )));
        }
        if let Some(ecg) = &self.ecg {
            if ecg.len() != self.scg.len() {
                return Err(Error::validation(format!(
                    "ecg has {} samples but scg has {}",
                    ecg.len(),
                    self.scg.len()
                )));
            }
        }
        if let Some(peaks) = &self.rpeaks {
            validate_annotations(peaks, self.len())?;
        }
        Ok(())
    }
}

/// Checks that annotation indices are strictly increasing and inside `[0, len)`.
pub fn validate_annotations(peaks: &[usize], len: usize) -> Result<()> {
    for (i, pair) in peaks.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::validation(format!(
                "annotations must be strictly increasing: entry {} ({}) follows {}",
                i + 1,
                pair[1],
                pair[0]
            )));
        }
    }
    if let Some(&last) = peaks.last() {
        if last >= len {
            return Err(Error::validation(format!(
                "annotation {last} is outside a record of {len} samples"
            )));
        }
    }
    Ok(())
}

/// Sibling annotation path for a record file: `data/s01.csv` -> `data/s01.rpeaks`.
pub fn annotation_path(record_path: &Path) -> PathBuf {
    record_path.with_extension("rpeaks")
}

/// Loads a `t,scg[,ecg]` CSV and its optional `.rpeaks` sibling.
///
/// The subject id is the file stem. The time column is only checked for
/// strict monotonicity; `fs` is authoritative.
pub fn load_record(path: &Path, fs: f64) -> Result<Record> {
    let text = fs::read_to_string(path)?;
    let format_err = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(1, "missing header".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let has_ecg = match columns.as_slice() {
        ["t", "scg"] => false,
        ["t", "scg", "ecg"] => true,
        _ => {
            return Err(format_err(
                1,
                format!("expected header `t,scg` or `t,scg,ecg`, found `{header}`"),
            ))
        }
    };

    let mut scg = Vec::new();
    let mut ecg = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(format_err(
                lineno,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let parse = |s: &str, name: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format_err(lineno, format!("invalid {name} value `{s}`")))
        };
        let t = parse(fields[0], "t")?;
        if t <= last_t {
            return Err(format_err(
                lineno,
                format!("time column must increase ({t} after {last_t})"),
            ));
        }
        last_t = t;
        scg.push(parse(fields[1], "scg")?);
        if has_ecg {
            ecg.push(parse(fields[2], "ecg")?);
        }
    }

    let ann_path = annotation_path(path);
    let rpeaks = if ann_path.exists() {
        Some(load_annotations(&ann_path)?)
    } else {
        None
    };

    let subject_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Record::new(subject_id, fs, scg, has_ecg.then_some(ecg), rpeaks)
}

/// Reads one integer sample index per line.
pub fn load_annotations(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut peaks = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value = line.parse::<usize>().map_err(|_| Error::Format {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("invalid annotation index `{line}`"),
        })?;
        peaks.push(value);
    }
    validate_annotations(&peaks, usize::MAX)?;
    Ok(peaks)
}

pub fn write_annotations(peaks: &[usize], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(peaks.len() * 8);
    for p in peaks {
        let _ = writeln!(out, "{p}");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the record CSV and, when annotations exist, the `.rpeaks` sibling.
/// Values use the shortest round-trip float representation, so a reload is
/// bit-exact.
pub fn write_record(record: &Record, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(record.len() * 32);
    out.push_str(if record.ecg.is_some() {
        "t,scg,ecg\n"
    } else {
        "t,scg\n"
    });
    for i in 0..record.len() {
        let t = i as f64 / record.fs;
        match &record.ecg {
            Some(ecg) => {
                let _ = writeln!(out, "{t},{},{}", record.scg[i], ecg[i]);
            }
            None => {
                let _ = writeln!(out, "{t},{}", record.scg[i]);
            }
        }
    }
    fs::write(path, out)?;
    if let Some(peaks) = &record.rpeaks {
        write_annotations(peaks, &annotation_path(path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.csv");
        fs::write(&path, "t,scg,ecg\n0,0.1,0.5\n1,0.2,0.4\n2,0.1,0.3\n").unwrap();
        let rec = load_record(&path, 5000.0).unwrap();
        assert_eq!(rec.len(), 3);
        assert_eq!(rec.subject_id, "s1");
        assert_eq!(rec.ecg.as_deref(), Some(&[0.5, 0.4, 0.3][..]));
        assert!(rec.rpeaks.is_none());
    }

    #[test]
    fn scg_only_header_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s2.csv");
        fs::write(&path, "t,scg\n0,1\n1,2\n").unwrap();
        let rec = load_record(&path, 100.0).unwrap();
        assert!(rec.ecg.is_none());
    }

    #[test]
    fn repeated_annotation_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.csv");
        let mut body = String::from("t,scg,ecg\n");
        for i in 0..10 {
            body.push_str(&format!("{i},0,0\n"));
        }
        fs::write(&path, body).unwrap();
        fs::write(annotation_path(&path), "5\n5\n").unwrap();
        let err = load_record(&path, 100.0).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t,scg,ecg\n0,0.1,0.5\n1,abc,0.4\n").unwrap();
        match load_record(&path, 100.0).unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_monotonic_time_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t,scg\n0,1\n0,2\n").unwrap();
        assert!(matches!(
            load_record(&path, 100.0),
            Err(Error::Format { line: 3, .. })
        ));
    }

    #[test]
    fn annotation_out_of_range_is_rejected() {
        let err = Record::new("x", 10.0, vec![0.0; 4], None, Some(vec![1, 4])).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn mismatched_stream_lengths_are_rejected() {
        assert!(Record::new("x", 10.0, vec![0.0; 4], Some(vec![0.0; 3]), None).is_err());
        assert!(Record::new("x", 0.0, vec![0.0; 4], None, None).is_err());
    }
}
