//! Run configuration: a plain-text file of `section.key = value` lines.
//!
//! Blank lines and `#` comments are ignored. Every key must be known;
//! `--set key=value` overrides are applied after the file.

use std::path::{Path, PathBuf};

use seismonet::eval::EvalConfig;
use seismonet::model::ModelConfig;
use seismonet::signal::{SplitConfig, SynthParams, WindowSpec};
use seismonet::train::TrainConfig;
use seismonet::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Checkpoint read by `infer` and `eval`; defaults to `<out_dir>/final.smn`.
    pub checkpoint: Option<PathBuf>,
    /// Sampling rate of record files, read and written.
    pub fs: f64,
    /// Rate records are resampled to before windowing, if set.
    pub target_fs: Option<f64>,
    pub window: WindowSpec,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub synth: SynthParams,
    pub synth_subjects: usize,
    /// Added to `synth.mean_hr_bpm` per subject index.
    pub synth_hr_step_bpm: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            data_dir: "data".into(),
            out_dir: "out".into(),
            checkpoint: None,
            fs: 250.0,
            target_fs: None,
            window: WindowSpec::default(),
            split: SplitConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            synth: SynthParams::default(),
            synth_subjects: 3,
            synth_hr_step_bpm: 5.0,
        };
        cfg.sync();
        cfg
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config {
        key: key.to_string(),
        message: format!("expected {what}, got `{value}`"),
    })
}

fn optional_rate(key: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse(key, v, "a rate in Hz or `none`").map(Some),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let format = |message: String| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(format(format!("`{key}` is set twice")));
            }
            cfg.set(key, value.trim())
                .map_err(|e| format(e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            Error::Validation(format!(
                "override `{assignment}` is not of the form key=value"
            ))
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, field) = key.split_once('.').unwrap_or(("", key));
        match section {
            "paths" => match field {
                "data_dir" => self.data_dir = value.into(),
                "out_dir" => self.out_dir = value.into(),
                "checkpoint" => self.checkpoint = (!value.is_empty()).then(|| value.into()),
                _ => return Err(unknown(key)),
            },
            "sampling" => match field {
                "fs" => self.fs = parse(key, value, "a rate in Hz")?,
                "target_fs" => self.target_fs = optional_rate(key, value)?,
                _ => return Err(unknown(key)),
            },
            "window" => match field {
                "w_sec" => self.window.w_sec = parse(key, value, "seconds")?,
                "hop_sec" => self.window.hop_sec = parse(key, value, "seconds")?,
                "dt_clip" => self.window.dt_clip = optional_rate(key, value)?,
                _ => return Err(unknown(key)),
            },
            "split" => match field {
                "train" => self.split.ratios.0 = parse(key, value, "a ratio")?,
                "val" => self.split.ratios.1 = parse(key, value, "a ratio")?,
                "test" => self.split.ratios.2 = parse(key, value, "a ratio")?,
                "drop_boundary" => self.split.drop_boundary = parse(key, value, "true or false")?,
                _ => return Err(unknown(key)),
            },
            "model" if field == "input_len" => {
                return Err(Error::Config {
                    key: key.into(),
                    message: "derived from window.w_sec and the sampling rate".into(),
                })
            }
            "model" => self.model.set(key, value)?,
            "train" => self.train.set(key, value)?,
            "eval" => self.eval.set(key, value)?,
            "synth" => match field {
                "subjects" => self.synth_subjects = parse(key, value, "an unsigned integer")?,
                "duration_s" => self.synth.duration_s = parse(key, value, "seconds")?,
                "mean_hr_bpm" => self.synth.mean_hr_bpm = parse(key, value, "beats per minute")?,
                "hr_step_bpm" => self.synth_hr_step_bpm = parse(key, value, "beats per minute")?,
                "hr_jitter" => self.synth.hr_jitter = parse(key, value, "a fraction")?,
                "scg_noise_sigma" => self.synth.scg_noise_sigma = parse(key, value, "a number")?,
                "seed" => self.synth.seed = parse(key, value, "an unsigned integer")?,
                _ => return Err(unknown(key)),
            },
            _ => return Err(unknown(key)),
        }
        self.sync();
        Ok(())
    }

    /// Sets the seed of both synthesis and training.
    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.train.seed = seed;
    }

    /// Rate the model sees.
    pub fn model_fs(&self) -> f64 {
        self.target_fs.unwrap_or(self.fs)
    }

    // keep derived fields in step with their sources
    fn sync(&mut self) {
        self.synth.fs = self.fs;
        if let Ok((w, _)) = self.window.samples(self.model_fs()) {
            self.model.input_len = w;
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("final.smn"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::Config {
                key: "sampling.fs".into(),
                message: "must be positive".into(),
            });
        }
        if let Some(t) = self.target_fs {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config {
                    key: "sampling.target_fs".into(),
                    message: "must be positive".into(),
                });
            }
        }
        self.window.samples(self.model_fs())?;
        self.split.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        self.synth.validate()?;
        if self.synth_subjects == 0 {
            return Err(Error::Config {
                key: "synth.subjects".into(),
                message: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

fn unknown(key: &str) -> Error {
    Error::Config {
        key: key.to_string(),
        message: "unknown key".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_derive_input_len() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.model.input_len, 2500);
        assert_eq!(cfg.train.epochs, 300);
        assert_eq!(cfg.eval.tol_ms, 90.0);
    }

    #[test]
    fn overrides_update_derived_fields() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("sampling.target_fs=100").unwrap();
        cfg.apply_override("window.w_sec = 2").unwrap();
        assert_eq!(cfg.model.input_len, 200);
        assert!(cfg.apply_override("model.input_len=10").is_err());
        assert!(cfg.apply_override("train.nope=1").is_err());
        assert!(cfg.apply_override("novalue").is_err());
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "# comment\ntrain.epochs = 5\n\nbogus.key = 1\n").unwrap();
        match RunConfig::load(&p) {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("bogus.key"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "train.epochs = 5 # five\n").unwrap();
        assert_eq!(RunConfig::load(&p).unwrap().train.epochs, 5);
    }
}
