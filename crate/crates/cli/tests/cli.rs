use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seismonet::signal::{load_annotations, load_record};

const SMALL: &str = "\
# small desk-scale run
paths.data_dir = {dir}/data
paths.out_dir = {dir}/out
sampling.fs = 100
window.w_sec = 2
window.hop_sec = 1
synth.subjects = 3
synth.duration_s = 30
model.levels = 2
model.first_channels = 4
train.epochs = 2
train.batch_size = 8
";

struct Env {
    dir: tempfile::TempDir,
    config: PathBuf,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("run.cfg");
        fs::write(
            &config,
            SMALL.replace("{dir}", &dir.path().display().to_string()),
        )
        .unwrap();
        Env { dir, config }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_seismonet"))
            .arg("--config")
            .arg(&self.config)
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn files_with(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    v.sort();
    v
}

#[test]
fn synth_writes_loadable_deterministic_records() {
    let env = Env::new();
    env.ok(&["synth"]);
    let csvs = files_with(&env.path("data"), "csv");
    assert_eq!(csvs.len(), 3);
    assert_eq!(files_with(&env.path("data"), "rpeaks").len(), 3);
    let first: Vec<Vec<u8>> = csvs.iter().map(|p| fs::read(p).unwrap()).collect();
    for p in &csvs {
        let r = load_record(p, 100.0).unwrap();
        assert_eq!(r.len(), 3000);
        assert!(r.rpeaks.is_some());
    }
    env.ok(&["synth"]);
    let again: Vec<Vec<u8>> = csvs.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(first, again);
}

#[test]
fn train_infer_eval_round() {
    let env = Env::new();
    env.ok(&["synth", "--seed", "3"]);
    env.ok(&["train", "--epochs", "3"]);
    let history = fs::read_to_string(env.path("out/history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "epoch,lr,train_loss,val_loss");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,0.001,"));
    assert!(env.path("out/final.smn").exists());

    let record = files_with(&env.path("data"), "csv").remove(0);
    env.ok(&["infer", record.to_str().unwrap()]);
    let stem = record.file_stem().unwrap().to_string_lossy().into_owned();
    let pred = fs::read_to_string(env.path(&format!("out/{stem}.pred.csv"))).unwrap();
    let rows: Vec<&str> = pred.lines().skip(1).collect();
    // 30 s record, 2 s windows, 1 s hop: 29 windows of 200 samples
    assert_eq!(rows.len(), 29 * 200);
    let peaks = load_annotations(&env.path(&format!("out/{stem}.peaks"))).unwrap();
    assert!(peaks.windows(2).all(|w| w[0] < w[1]));

    env.ok(&["eval", "--tune"]);
    let report = fs::read_to_string(env.path("out/report.csv")).unwrap();
    let total = report
        .lines()
        .find(|l| l.starts_with("total,"))
        .expect("total row");
    let f: Vec<usize> = total
        .split(',')
        .skip(1)
        .take(5)
        .map(|v| v.parse().unwrap())
        .collect();
    let (detected, actual, tp, fp, fn_) = (f[0], f[1], f[2], f[3], f[4]);
    assert_eq!(tp + fn_, actual);
    assert_eq!(tp + fp, detected);
    assert!(fs::read_to_string(env.path("out/hrv.csv"))
        .unwrap()
        .starts_with("subject,source,"));
}

#[test]
fn oracle_eval_is_perfect() {
    let env = Env::new();
    env.ok(&["synth"]);
    env.ok(&["eval", "--oracle"]);
    let report = fs::read_to_string(env.path("out/report.csv")).unwrap();
    let total = report.lines().find(|l| l.starts_with("total,")).unwrap();
    assert!(total.ends_with(",1.00,1.00"), "{total}");
    for index in ["mean_nn", "sdnn", "rmssd", "pnn50"] {
        assert!(env.path(&format!("out/bland_altman_{index}.csv")).exists());
    }
}

#[test]
fn hrv_and_agree() {
    let env = Env::new();
    env.ok(&["synth"]);
    let peaks = files_with(&env.path("data"), "rpeaks");
    let args: Vec<&str> = std::iter::once("hrv")
        .chain(peaks.iter().map(|p| p.to_str().unwrap()))
        .collect();
    let ecg = env.ok(&args);
    assert_eq!(ecg.lines().count(), 4);

    // pair each subject with a slightly perturbed copy of itself
    let mut combined = ecg.clone();
    for line in ecg.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let mean: f64 = f[2].parse::<f64>().unwrap() + 3.0;
        combined.push_str(&format!("{},scg,{mean},{},{},{}\n", f[0], f[3], f[4], f[5]));
    }
    let hrv_path = env.path("hrv.csv");
    fs::write(&hrv_path, combined).unwrap();
    let out = env.ok(&["agree", hrv_path.to_str().unwrap(), "--index", "mean_nn"]);
    assert!(
        out.starts_with("# index=mean_nn\nindex,mean,diff\n"),
        "{out}"
    );
    assert!(out.contains("mean_diff=3"), "{out}");
}

#[test]
fn exit_codes() {
    let env = Env::new();
    // unknown configuration key: validation
    assert_eq!(
        env.run(&["synth", "--set", "synth.colour=red"])
            .status
            .code(),
        Some(1)
    );
    // missing checkpoint: validation
    env.ok(&["synth"]);
    let out = env.run(&["eval"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
    // bad command line: validation
    assert_eq!(
        env.run(&["train", "--epochs", "many"]).status.code(),
        Some(1)
    );
    // diverging training: numeric failure
    assert_eq!(
        env.run(&["train", "--set", "train.lr0=1e30"]).status.code(),
        Some(2)
    );
}

#[test]
fn short_record_reports_empty_result() {
    let env = Env::new();
    env.ok(&["synth"]);
    env.ok(&["train", "--epochs", "1"]);
    let short = env.path("short.csv");
    fs::write(&short, "t,scg\n0,0.1\n0.01,0.2\n0.02,0.1\n").unwrap();
    let out = env.run(&["infer", short.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shorter than one"));
}

#[test]
fn config_errors_name_the_key_and_write_nothing() {
    let env = Env::new();
    let out = env.run(&["synth", "--set", "split.train=0.9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("split.ratios"));
    assert!(!env.path("data").exists());
}
