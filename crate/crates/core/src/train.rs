//! Minibatch SGD over windowed datasets with step learning-rate decay.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{save_checkpoint, SeismoNet};
use crate::nn::{
    lr_schedule, sgd_step, smooth_l1, smooth_l1_loss, Mode, Real, Reduction, SignalTensor,
};
use crate::signal::{DatasetSplit, Window};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    pub schedule_step: usize,
    pub schedule_factor: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Write `epoch_NNNN.smn` every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    pub reduction: Reduction,
    /// Where `final.smn`, `best.smn` and periodic checkpoints go; none writes nothing.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            lr0: 0.001,
            schedule_step: 100,
            schedule_factor: 10.0,
            batch_size: 16,
            seed: 0,
            shuffle: true,
            checkpoint_every: 0,
            reduction: Reduction::WindowSum,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::config("train.lr0", "must be a positive number"));
        }
        if self.schedule_step == 0 {
            return Err(Error::config("train.schedule_step", "must be >= 1"));
        }
        if !(self.schedule_factor > 0.0 && self.schedule_factor.is_finite()) {
            return Err(Error::config(
                "train.schedule_factor",
                "must be a positive number",
            ));
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        lr_schedule(epoch, self.lr0, self.schedule_step, self.schedule_factor)
    }

    /// Sets one field from its key (with or without the `train.` prefix).
    /// The checkpoint directory is a path setting and is not handled here.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let field = key.strip_prefix("train.").unwrap_or(key);
        let full = format!("train.{field}");
        let v = value.trim();
        let bad = |what: &str| Error::config(&full, format!("expected {what}, got `{value}`"));
        match field {
            "epochs" => self.epochs = v.parse().map_err(|_| bad("an unsigned integer"))?,
            "lr0" => self.lr0 = v.parse().map_err(|_| bad("a number"))?,
            "schedule_step" => {
                self.schedule_step = v.parse().map_err(|_| bad("an unsigned integer"))?
            }
            "schedule_factor" => self.schedule_factor = v.parse().map_err(|_| bad("a number"))?,
            "batch_size" => self.batch_size = v.parse().map_err(|_| bad("an unsigned integer"))?,
            "seed" => self.seed = v.parse().map_err(|_| bad("an unsigned integer"))?,
            "shuffle" => self.shuffle = v.parse().map_err(|_| bad("true or false"))?,
            "checkpoint_every" => {
                self.checkpoint_every = v.parse().map_err(|_| bad("an unsigned integer"))?
            }
            "reduction" => self.reduction = v.parse()?,
            _ => return Err(Error::config(full, "unknown train key")),
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sample Smooth-L1 over the epoch's training batches.
    pub train_loss: f64,
    /// Inference-mode loss on the validation windows, if there are any.
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,val_loss\n");
        for r in &self.records {
            let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.lr, r.train_loss, val);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn best_val(&self) -> Option<&EpochRecord> {
        self.records
            .iter()
            .filter(|r| r.val_loss.is_some())
            .min_by(|a, b| a.val_loss.partial_cmp(&b.val_loss).unwrap())
    }
}

fn target(w: &Window) -> Result<&[f64]> {
    w.target_dt.as_deref().ok_or_else(|| {
        Error::validation(format!(
            "window {}@{} has no distance-transform target",
            w.subject_id, w.start
        ))
    })
}

fn batch_tensors<T: Real>(windows: &[&Window]) -> Result<(SignalTensor<T>, SignalTensor<T>)> {
    let inputs: Vec<&[f64]> = windows.iter().map(|w| w.scg_seg.as_slice()).collect();
    let targets = windows
        .iter()
        .map(|w| target(w))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        SignalTensor::from_rows(&inputs)?,
        SignalTensor::from_rows(&targets)?,
    ))
}

/// Mean per-sample Smooth-L1 between predictions and targets over `windows`,
/// with the model in inference mode. Nothing is mutated.
pub fn evaluate_loss<T: Real>(model: &SeismoNet<T>, windows: &[Window]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::Empty("no windows to evaluate".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in windows.chunks(64) {
        let refs: Vec<&Window> = chunk.iter().collect();
        let (x, y) = batch_tensors::<T>(&refs)?;
        let pred = model.infer(&x)?;
        for (p, t) in pred.values.iter().zip(&y.values) {
            total += smooth_l1(p.as_f64() - t.as_f64());
        }
        count += y.values.len();
    }
    Ok(total / count as f64)
}

/// Trains with [`train_with`] and no progress callback.
pub fn train<T: Real>(
    model: SeismoNet<T>,
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<(SeismoNet<T>, TrainHistory)> {
    train_with(model, split, cfg, |_| {})
}

/// Runs `cfg.epochs` epochs of minibatch SGD on `split.train`, recording the
/// validation loss after each epoch. `on_epoch` sees each record as it is made.
pub fn train_with<T: Real>(
    mut model: SeismoNet<T>,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(SeismoNet<T>, TrainHistory)> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::Empty("training split has no windows".into()));
    }
    for w in split.train.iter().chain(&split.val) {
        target(w)?;
    }
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut history = TrainHistory::default();
    let mut best = f64::INFINITY;
    let first_epoch = model.epoch;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr(epoch);
        let mut order: Vec<usize> = (0..split.train.len()).collect();
        if cfg.shuffle {
            // permutation depends only on (seed, epoch)
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(epoch as u64);
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&Window> = idx.iter().map(|&i| &split.train[i]).collect();
            let (x, y) = batch_tensors::<T>(&refs)?;
            let mut pred = model.forward(&x, Mode::Train)?;
            let loss = smooth_l1_loss(&mut pred, &y, cfg.reduction)?.as_f64();
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss is {loss} at epoch {epoch}, batch {b}"
                )));
            }
            model.backward(&pred)?;
            sgd_step(&mut model.params, T::lit(lr))
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}, batch {b}: {e}")))?;
            let per_sample = match cfg.reduction {
                Reduction::Mean => loss,
                Reduction::Sum => loss / y.values.len() as f64,
                Reduction::WindowSum => loss / refs.len() as f64,
            };
            loss_sum += per_sample * refs.len() as f64;
        }
        model.epoch = first_epoch + epoch + 1;
        let val_loss = if split.val.is_empty() {
            None
        } else {
            Some(evaluate_loss(&model, &split.val)?)
        };
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / split.train.len() as f64,
            val_loss,
        };
        on_epoch(&record);
        history.records.push(record);

        if let Some(dir) = &cfg.checkpoint_dir {
            if let Some(v) = val_loss.filter(|&v| v < best) {
                best = v;
                save_checkpoint(&model, &dir.join("best.smn"))?;
            }
            if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
                save_checkpoint(&model, &dir.join(format!("epoch_{:04}.smn", epoch + 1)))?;
            }
        }
    }
    if let Some(dir) = &cfg.checkpoint_dir {
        save_checkpoint(&model, &dir.join("final.smn"))?;
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelConfig};
    use crate::signal::distance_transform_f64;

    fn tiny_model() -> ModelConfig {
        ModelConfig {
            levels: 3,
            first_channels: 8,
            input_len: 64,
            ..ModelConfig::default()
        }
    }

    fn toy_windows(n: usize, len: usize) -> Vec<Window> {
        (0..n)
            .map(|i| {
                let peaks = vec![5 + i % 7, 30 + (3 * i) % 11, 55];
                let mut scg = vec![0.0; len];
                for &p in &peaks {
                    for (k, v) in scg.iter_mut().enumerate() {
                        let d = k as f64 - p as f64;
                        *v += (-d * d / 4.0).exp() * (d * 0.8).cos();
                    }
                }
                Window {
                    subject_id: "toy".into(),
                    start: i * len,
                    target_dt: Some(distance_transform_f64(&peaks, len, None).unwrap()),
                    rpeaks_local: Some(peaks),
                    scg_seg: scg,
                }
            })
            .collect()
    }

    #[test]
    fn lr_column_follows_step_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr(0), 0.001);
        assert_eq!(cfg.lr(99), 0.001);
        assert_eq!(cfg.lr(100), 0.001 / 10.0);
        assert_eq!(cfg.lr(250), 0.001 / 100.0);
    }

    #[test]
    fn one_epoch_one_record() {
        let split = DatasetSplit {
            train: toy_windows(3, 64),
            ..Default::default()
        };
        let cfg = TrainConfig {
            epochs: 1,
            ..Default::default()
        };
        let m = build_model::<f32>(&tiny_model(), 0).unwrap();
        let (m, h) = train(m, &split, &cfg).unwrap();
        assert_eq!(h.records.len(), 1);
        assert_eq!(h.records[0].val_loss, None);
        assert_eq!(m.epoch, 1);
    }

    #[test]
    fn evaluate_loss_is_pure_and_matches_formula() {
        let m = build_model::<f64>(&tiny_model(), 2).unwrap();
        let ws = toy_windows(2, 64);
        let before = (
            m.params.flat_values(),
            m.batchnorm_stats()
                .into_iter()
                .map(|(_, s)| s.clone())
                .collect::<Vec<_>>(),
        );
        let a = evaluate_loss(&m, &ws).unwrap();
        let b = evaluate_loss(&m, &ws).unwrap();
        assert_eq!(a, b);
        let after = (
            m.params.flat_values(),
            m.batchnorm_stats()
                .into_iter()
                .map(|(_, s)| s.clone())
                .collect::<Vec<_>>(),
        );
        assert_eq!(before, after);

        let rows: Vec<&[f64]> = ws.iter().map(|w| w.scg_seg.as_slice()).collect();
        let pred = m.predict(&rows).unwrap();
        let mut total = 0.0;
        for (p, w) in pred.iter().zip(&ws) {
            for (a, b) in p.iter().zip(w.target_dt.as_ref().unwrap()) {
                let d: f64 = a - b;
                total += if d.abs() < 1.0 {
                    0.5 * d * d
                } else {
                    d.abs() - 0.5
                };
            }
        }
        assert!((a - total / 128.0).abs() < 1e-12);
        assert!(matches!(evaluate_loss(&m, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn unlabeled_window_is_rejected() {
        let mut ws = toy_windows(2, 64);
        ws[1].target_dt = None;
        let split = DatasetSplit {
            train: ws,
            ..Default::default()
        };
        let m = build_model::<f32>(&tiny_model(), 0).unwrap();
        assert!(matches!(
            train(m, &split, &TrainConfig::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn overfits_a_tiny_set() {
        let split = DatasetSplit {
            train: toy_windows(8, 64),
            val: toy_windows(2, 64),
            ..Default::default()
        };
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 4,
            seed: 1,
            lr0: 0.01,
            ..Default::default()
        };
        let m = build_model::<f32>(&tiny_model(), 1).unwrap();
        let (_, h) = train(m, &split, &cfg).unwrap();
        let first = h.records[0].train_loss;
        let last = h.records.last().unwrap().train_loss;
        assert!(last < 0.1 * first, "first {first}, last {last}");
    }

    #[test]
    fn same_seed_same_history() {
        let split = DatasetSplit {
            train: toy_windows(6, 64),
            val: toy_windows(2, 64),
            ..Default::default()
        };
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 5,
            ..Default::default()
        };
        let run = || {
            train(build_model::<f32>(&tiny_model(), 5).unwrap(), &split, &cfg)
                .unwrap()
                .1
                .to_csv()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoints_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let split = DatasetSplit {
            train: toy_windows(4, 64),
            val: toy_windows(2, 64),
            ..Default::default()
        };
        let cfg = TrainConfig {
            epochs: 4,
            checkpoint_every: 2,
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        train(build_model::<f32>(&tiny_model(), 0).unwrap(), &split, &cfg).unwrap();
        for f in ["final.smn", "best.smn", "epoch_0002.smn", "epoch_0004.smn"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let m: SeismoNet<f32> =
            crate::model::load_checkpoint(&dir.path().join("final.smn")).unwrap();
        assert_eq!(m.epoch, 4);
    }
}
