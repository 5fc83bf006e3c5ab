use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::record::Record;
use crate::error::{Error, Result};

/// Parameters of the synthetic SCG/ECG generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub fs: f64,
    pub duration_s: f64,
    pub mean_hr_bpm: f64,
    /// Fractional RR variability: each RR is scaled by `1 + hr_jitter * u`, `u ~ U[-1, 1]`.
    pub hr_jitter: f64,
    pub scg_noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            fs: 250.0,
            duration_s: 60.0,
            mean_hr_bpm: 70.0,
            hr_jitter: 0.08,
            scg_noise_sigma: 0.1,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::config("synth.fs", "must be positive"));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::config("synth.duration_s", "must be positive"));
        }
        if !(self.mean_hr_bpm > 20.0 && self.mean_hr_bpm < 250.0) {
            return Err(Error::config("synth.mean_hr_bpm", "must lie in (20, 250)"));
        }
        if !(0.0..1.0).contains(&self.hr_jitter) {
            return Err(Error::config("synth.hr_jitter", "must lie in [0, 1)"));
        }
        if !(self.scg_noise_sigma >= 0.0 && self.scg_noise_sigma.is_finite()) {
            return Err(Error::config("synth.scg_noise_sigma", "must be >= 0"));
        }
        Ok(())
    }
}

// ECG morphology: sharp R spike, small S dip, broad T wave (seconds / amplitude).
const R_SIGMA: f64 = 0.008;
const S_OFFSET: f64 = 0.025;
const S_SIGMA: f64 = 0.010;
const S_AMP: f64 = -0.2;
const T_OFFSET: f64 = 0.25;
const T_SIGMA: f64 = 0.04;
const T_AMP: f64 = 0.25;

// SCG bursts: (latency after R, carrier Hz, decay s, relative amplitude).
const SCG_BURSTS: [(f64, f64, f64, f64); 2] = [(0.04, 20.0, 0.03, 1.0), (0.30, 15.0, 0.04, 0.5)];
const SCG_AMP_SPREAD: f64 = 0.2;

/// Generates a deterministic SCG/ECG record with ground-truth R-peaks.
pub fn synth_record(params: &SynthParams) -> Result<Record> {
    params.validate()?;
    let fs = params.fs;
    let n = (params.duration_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let base_rr = 60.0 / params.mean_hr_bpm;
    let draw_rr = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random_range(-1.0..=1.0);
        base_rr * (1.0 + params.hr_jitter * u)
    };

    let mut peak_times = Vec::new();
    let mut t = 0.5 * draw_rr(&mut rng);
    while t < params.duration_s {
        peak_times.push(t);
        t += draw_rr(&mut rng);
    }
    let mut rpeaks: Vec<usize> = Vec::with_capacity(peak_times.len());
    for &pt in &peak_times {
        let idx = (pt * fs).round() as usize;
        if idx < n && rpeaks.last().is_none_or(|&prev| idx > prev) {
            rpeaks.push(idx);
        }
    }
    let amps: Vec<f64> = rpeaks
        .iter()
        .map(|_| 1.0 + SCG_AMP_SPREAD * rng.random_range(-1.0..=1.0))
        .collect();

    let mut ecg = vec![0.0; n];
    let mut scg = vec![0.0; n];
    let support = (0.6 * fs).ceil() as usize;
    for (&p, &amp) in rpeaks.iter().zip(&amps) {
        let lo = p.saturating_sub((0.1 * fs).ceil() as usize);
        let hi = (p + support).min(n);
        for i in lo..hi {
            let dt = (i as f64 - p as f64) / fs;
            ecg[i] += gaussian(dt, 0.0, R_SIGMA)
                + S_AMP * gaussian(dt, S_OFFSET, S_SIGMA)
                + T_AMP * gaussian(dt, T_OFFSET, T_SIGMA);
            for &(latency, freq, decay, rel) in &SCG_BURSTS {
                let tau = dt - latency;
                if (0.0..6.0 * decay).contains(&tau) {
                    scg[i] += amp * rel * (-tau / decay).exp() * (2.0 * PI * freq * tau).sin();
                }
            }
        }
    }

    if params.scg_noise_sigma > 0.0 {
        let noise = Normal::new(0.0, params.scg_noise_sigma)
            .map_err(|e| Error::config("synth.scg_noise_sigma", e.to_string()))?;
        for v in &mut scg {
            *v += noise.sample(&mut rng);
        }
    }

    Record::new(
        format!("synth{}", params.seed),
        fs,
        scg,
        Some(ecg),
        Some(rpeaks),
    )
}

fn gaussian(t: f64, center: f64, sigma: f64) -> f64 {
    let z = (t - center) / sigma;
    (-0.5 * z * z).exp()
}
