use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use seismonet::eval::{
    bland_altman, evaluate_model, evaluate_windows, format_metric, hrv_csv, hrv_indices,
    infer_record, nn_intervals, parse_hrv_csv, subject_pairs, tune_prominence, HrvIndex, HrvRow,
    SplitEvaluation,
};
use seismonet::model::{build_model, load_checkpoint, SeismoNet};
use seismonet::signal::{
    annotate_ecg_rpeaks, build_dataset, load_annotations, load_record, resample_record,
    rescale_annotations, synth_record, write_record, Record,
};
use seismonet::train::train_with;
use seismonet::{Error, Result};

use crate::config::RunConfig;

fn require_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{what} `{}` does not exist",
            path.display()
        )))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let mut records = Vec::with_capacity(cfg.synth_subjects);
    for i in 0..cfg.synth_subjects {
        let mut p = cfg.synth.clone();
        p.seed = cfg.synth.seed + i as u64;
        p.mean_hr_bpm = cfg.synth.mean_hr_bpm + cfg.synth_hr_step_bpm * i as f64;
        p.validate()?;
        records.push(synth_record(&p)?);
    }
    fs::create_dir_all(&cfg.data_dir)?;
    for r in &records {
        let path = cfg.data_dir.join(format!("{}.csv", r.subject_id));
        write_record(r, &path)?;
        say(&path.display().to_string());
    }
    Ok(())
}

/// Loads one record at the configured rate, annotating the ECG when no
/// annotation file exists, and resamples it for the model.
fn prepare_record(cfg: &RunConfig, path: &Path) -> Result<Record> {
    require_exists(path, "record")?;
    let mut r = load_record(path, cfg.fs)?;
    if r.rpeaks.is_none() {
        if let Some(ecg) = &r.ecg {
            r.rpeaks = Some(annotate_ecg_rpeaks(ecg, r.fs));
        }
    }
    match cfg.target_fs {
        Some(t) => resample_record(&r, t),
        None => Ok(r),
    }
}

fn load_records(cfg: &RunConfig) -> Result<Vec<Record>> {
    require_exists(&cfg.data_dir, "data directory")?;
    let mut paths: Vec<PathBuf> = fs::read_dir(&cfg.data_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Validation(format!(
            "no .csv records in `{}`",
            cfg.data_dir.display()
        )));
    }
    paths.iter().map(|p| prepare_record(cfg, p)).collect()
}

fn load_model(cfg: &RunConfig) -> Result<SeismoNet<f32>> {
    let path = cfg.checkpoint_path();
    require_exists(&path, "checkpoint")?;
    let model: SeismoNet<f32> = load_checkpoint(&path)?;
    if model.config().input_len != cfg.model.input_len {
        return Err(Error::Validation(format!(
            "checkpoint expects {}-sample windows but the configured window is {} samples",
            model.config().input_len,
            cfg.model.input_len
        )));
    }
    Ok(model)
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let records = load_records(cfg)?;
    let split = build_dataset(&records, &cfg.window, &cfg.split)?;
    let model = build_model::<f32>(&cfg.model, cfg.train.seed)?;
    eprintln!(
        "{} train / {} val / {} test windows, {} parameters",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        model.params.numel()
    );
    let mut tc = cfg.train.clone();
    tc.checkpoint_dir = Some(cfg.out_dir.clone());
    let (_, history) = train_with(model, &split, &tc, |r| {
        let val = r.val_loss.map_or("-".to_string(), |v| format!("{v:.4}"));
        eprintln!(
            "epoch {} lr {} train {:.4} val {val}",
            r.epoch, r.lr, r.train_loss
        );
    })?;
    let path = cfg.out_dir.join("history.csv");
    history.write_csv(&path)?;
    say(&cfg.out_dir.join("final.smn").display().to_string());
    say(&path.display().to_string());
    Ok(())
}

pub fn infer(cfg: &RunConfig, record_path: &Path) -> Result<()> {
    let model = load_model(cfg)?;
    let record = prepare_record(cfg, record_path)?;
    let result = infer_record(&model, &record, &cfg.window, &cfg.eval.valleys)?;
    // report peaks at the rate of the input file
    let peaks = match cfg.target_fs {
        Some(t) => {
            let len = (record.len() as f64 * cfg.fs / t).round() as usize;
            rescale_annotations(&result.peaks, t, cfg.fs, len)
        }
        None => result.peaks,
    };
    let mut pred = String::from("start,offset,value\n");
    for (start, values) in &result.windows {
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(pred, "{start},{i},{v}");
        }
    }
    let stem = record_path
        .file_stem()
        .map_or("record".into(), |s| s.to_string_lossy().into_owned());
    fs::create_dir_all(&cfg.out_dir)?;
    let pred_path = cfg.out_dir.join(format!("{stem}.pred.csv"));
    let peaks_path = cfg.out_dir.join(format!("{stem}.peaks"));
    write(&pred_path, &pred)?;
    seismonet::signal::write_annotations(&peaks, &peaks_path)?;
    say(&pred_path.display().to_string());
    say(&peaks_path.display().to_string());
    eprintln!("{} windows, {} peaks", result.windows.len(), peaks.len());
    Ok(())
}

fn write_agreement(cfg: &RunConfig, ev: &SplitEvaluation) -> Result<Vec<PathBuf>> {
    let rows = ev.hrv_rows();
    let mut written = Vec::new();
    for index in HrvIndex::ALL {
        let pairs: Vec<(f64, f64)> = subject_pairs(&rows, index)
            .into_iter()
            .map(|(_, a, b)| (a, b))
            .collect();
        if pairs.len() < 2 {
            continue;
        }
        let path = cfg
            .out_dir
            .join(format!("bland_altman_{}.csv", index.name()));
        write(&path, &bland_altman(&pairs)?.to_csv())?;
        written.push(path);
    }
    Ok(written)
}

const PROMINENCE_GRID: [f64; 6] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0];

pub fn eval(cfg: &RunConfig, oracle: bool, tune: bool) -> Result<()> {
    let model = if oracle { None } else { Some(load_model(cfg)?) };
    let records = load_records(cfg)?;
    let split = build_dataset(&records, &cfg.window, &cfg.split)?;
    if split.test.is_empty() {
        return Err(Error::InsufficientData("test split is empty".into()));
    }
    let fs = cfg.model_fs();
    let mut eval_cfg = cfg.eval.clone();
    if let (true, Some(m)) = (tune, &model) {
        if split.val.is_empty() {
            return Err(Error::InsufficientData("validation split is empty".into()));
        }
        let (prom, counts) = tune_prominence(m, &split.val, fs, &eval_cfg, &PROMINENCE_GRID)?;
        eprintln!(
            "validation: prominence {prom} (Se {} PPV {})",
            format_metric(counts.sensitivity()),
            format_metric(counts.ppv())
        );
        eval_cfg.valleys.min_prominence = prom;
    }
    let ev = match &model {
        Some(m) => evaluate_model(m, &split.test, fs, &eval_cfg)?,
        None => evaluate_windows(&split.test, fs, &eval_cfg, |ws| {
            Ok(ws
                .iter()
                .map(|w| w.target_dt.clone().unwrap_or_default())
                .collect())
        })?,
    };
    fs::create_dir_all(&cfg.out_dir)?;
    let report = ev.report();
    let report_path = cfg.out_dir.join("report.csv");
    write(&report_path, &report.to_csv())?;
    let hrv_path = cfg.out_dir.join("hrv.csv");
    write(&hrv_path, &hrv_csv(&ev.hrv_rows()))?;
    say(&report_path.display().to_string());
    say(&hrv_path.display().to_string());
    for p in write_agreement(cfg, &ev)? {
        say(&p.display().to_string());
    }
    let t = report.total();
    eprintln!(
        "total: detected {} actual {} tp {} fp {} fn {} Se {} PPV {} ({} counting)",
        t.detected(),
        t.actual(),
        t.tp,
        t.fp,
        t.fn_,
        format_metric(t.sensitivity()),
        format_metric(t.ppv()),
        eval_cfg.counting
    );
    Ok(())
}

fn subject_of(path: &Path) -> String {
    let name = path
        .file_name()
        .map_or(String::new(), |n| n.to_string_lossy().into_owned());
    name.split('.').next().unwrap_or(&name).to_string()
}

pub fn hrv(
    cfg: &RunConfig,
    peak_files: &[PathBuf],
    source: &str,
    out: Option<&Path>,
) -> Result<()> {
    let mut rows = Vec::new();
    for p in peak_files {
        require_exists(p, "peak file")?;
        let peaks = load_annotations(p)?;
        let indices = hrv_indices(&nn_intervals(&peaks, cfg.fs)?)?;
        rows.push(HrvRow {
            subject: subject_of(p),
            source: source.to_string(),
            indices,
        });
    }
    emit(&hrv_csv(&rows), out)
}

pub fn agree(hrv_path: &Path, index: Option<&str>, out: Option<&Path>) -> Result<()> {
    require_exists(hrv_path, "HRV file")?;
    let rows = parse_hrv_csv(&fs::read_to_string(hrv_path)?)?;
    let indices = match index {
        Some(name) => vec![name.parse::<HrvIndex>()?],
        None => HrvIndex::ALL.to_vec(),
    };
    let mut text = String::new();
    for index in indices {
        let pairs: Vec<(f64, f64)> = subject_pairs(&rows, index)
            .into_iter()
            .map(|(_, a, b)| (a, b))
            .collect();
        let stats = bland_altman(&pairs)?;
        let _ = writeln!(text, "# index={}", index.name());
        text.push_str(&stats.to_csv());
    }
    emit(&text, out)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            put(text);
            Ok(())
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) ends the process quietly.
fn put(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing output: {e}");
        std::process::exit(2);
    }
}

fn say(line: &str) {
    put(&format!("{line}\n"));
}
