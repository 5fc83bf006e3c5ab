//! wasm-bindgen bindings for the static page in `www/`.
//!
//! The page generates a synthetic recording, perturbs its exact distance
//! transform to mimic an imperfect network output, picks valleys from it and
//! scores them against the reference R-peaks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wasm_bindgen::prelude::*;

use seismonet::eval::{
    bland_altman, detect_valleys, hrv_indices, match_peaks, nn_intervals, MatchCounts, ValleyParams,
};
use seismonet::signal::{distance_transform, synth_record, Record, SynthParams};
use seismonet::{Error, Result};

const FS: f64 = 100.0;
const TOL_MS: f64 = 90.0;

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Scene {
    record: Record,
    target: Vec<f64>,
    estimate: Vec<f64>,
    detected: Vec<usize>,
}

impl Scene {
    pub fn build(mean_hr_bpm: f64, scg_noise: f64, duration_s: f64, seed: u64) -> Result<Scene> {
        let record = synth_record(&SynthParams {
            fs: FS,
            duration_s,
            mean_hr_bpm,
            scg_noise_sigma: scg_noise,
            seed,
            ..Default::default()
        })?;
        let target: Vec<f64> =
            distance_transform(record.rpeaks.as_deref().unwrap_or_default(), record.len())?
                .into_iter()
                .map(|d| d as f64)
                .collect();
        Ok(Scene {
            estimate: target.clone(),
            record,
            target,
            detected: Vec::new(),
        })
    }

    fn reference(&self) -> &[usize] {
        self.record.rpeaks.as_deref().unwrap_or_default()
    }

    pub fn run_detection(
        &mut self,
        dt_noise: f64,
        min_prominence: f64,
        seed: u64,
    ) -> Result<MatchCounts> {
        let noise =
            Normal::new(0.0, dt_noise.max(0.0)).map_err(|e| Error::Validation(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.estimate = self
            .target
            .iter()
            .map(|t| t + noise.sample(&mut rng))
            .collect();
        let params = ValleyParams {
            min_prominence,
            ..Default::default()
        };
        params.validate()?;
        self.detected = detect_valleys(&self.estimate, FS, &params);
        Ok(match_peaks(&self.detected, self.reference(), TOL_MS, FS))
    }

    pub fn hrv_pair(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(8);
        for peaks in [self.reference(), &self.detected] {
            let h = hrv_indices(&nn_intervals(peaks, FS)?)?;
            out.extend([h.mean_nn_ms, h.sdnn_ms, h.rmssd_ms, h.pnn50]);
        }
        Ok(out)
    }
}

#[wasm_bindgen]
impl Scene {
    /// A synthetic recording sampled at 100 Hz.
    #[wasm_bindgen(constructor)]
    pub fn new(
        mean_hr_bpm: f64,
        scg_noise: f64,
        duration_s: f64,
        seed: u64,
    ) -> std::result::Result<Scene, JsError> {
        Scene::build(mean_hr_bpm, scg_noise, duration_s, seed).map_err(js_err)
    }

    pub fn fs(&self) -> f64 {
        FS
    }

    pub fn scg(&self) -> Vec<f64> {
        self.record.scg.clone()
    }

    pub fn target(&self) -> Vec<f64> {
        self.target.clone()
    }

    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }

    pub fn rpeaks(&self) -> Vec<u32> {
        self.reference().iter().map(|&p| p as u32).collect()
    }

    pub fn detected(&self) -> Vec<u32> {
        self.detected.iter().map(|&p| p as u32).collect()
    }

    /// Replaces the estimate with the exact transform plus white noise of the
    /// given standard deviation (in samples), then detects valleys.
    /// Returns `[tp, fp, fn, sensitivity, ppv]`.
    pub fn detect(
        &mut self,
        dt_noise: f64,
        min_prominence: f64,
        seed: u64,
    ) -> std::result::Result<Vec<f64>, JsError> {
        let c = self
            .run_detection(dt_noise, min_prominence, seed)
            .map_err(js_err)?;
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        Ok(vec![
            c.tp as f64,
            c.fp as f64,
            c.fn_ as f64,
            nan(c.sensitivity()),
            nan(c.ppv()),
        ])
    }

    /// HRV of the reference beats then the detected beats, each as
    /// `[mean_nn_ms, sdnn_ms, rmssd_ms, pnn50]`.
    pub fn hrv(&self) -> std::result::Result<Vec<f64>, JsError> {
        self.hrv_pair().map_err(js_err)
    }
}

pub fn agreement_summary(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Validation("paired series differ in length".into()));
    }
    let pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    let s = bland_altman(&pairs)?;
    Ok(vec![
        s.mean_diff,
        s.sd_diff,
        s.loa_low,
        s.loa_high,
        s.outliers.len() as f64,
    ])
}

/// Bland-Altman summary of paired measurements:
/// `[mean_diff, sd_diff, loa_low, loa_high, outliers]`.
#[wasm_bindgen]
pub fn agreement(a: &[f64], b: &[f64]) -> std::result::Result<Vec<f64>, JsError> {
    agreement_summary(a, b).map_err(js_err)
}
