use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::blocks::{BlockSpec, ContractingBlock, DenoiseBlock, EnsembleBlock, ExpandingBlock};
use super::config::{LevelPlan, ModelConfig};
use crate::error::{Error, Result};
use crate::nn::{BatchNormStats, Layer, Mode, ParamStore, Real, SignalTensor};

/// Encoder-decoder network mapping an SCG window to a same-length
/// distance-transform estimate.
#[derive(Clone, Debug)]
pub struct SeismoNet<T> {
    config: ModelConfig,
    plan: LevelPlan,
    pub params: ParamStore<T>,
    ensemble: EnsembleBlock<T>,
    contracting: Vec<ContractingBlock<T>>,
    expanding: Vec<ExpandingBlock<T>>,
    denoise: DenoiseBlock<T>,
    /// Epochs of training this model has seen.
    pub epoch: usize,
}

/// Builds a freshly initialized model; parameters are a function of `seed` alone.
pub fn build_model<T: Real>(config: &ModelConfig, seed: u64) -> Result<SeismoNet<T>> {
    SeismoNet::new(config, seed)
}

impl<T: Real> SeismoNet<T> {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let plan = config.plan();
        let n = config.levels;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let spec_down = BlockSpec {
            kernel_p: config.kernel_p,
            kernel_resample: config.kernel_s,
            stride: config.stride,
            inception_kernels: &config.inception_kernels,
            slope: config.leaky_slope,
        };
        let spec_up = BlockSpec {
            kernel_resample: config.kernel_st,
            ..spec_down.clone()
        };

        let ensemble = EnsembleBlock::new(
            &mut params,
            "ensemble",
            config.ensemble_channels(),
            config.ensemble_kernel,
            &mut rng,
        )?;
        let mut contracting = Vec::with_capacity(n);
        for level in 1..=n {
            contracting.push(ContractingBlock::new(
                &mut params,
                &format!("ccb{level}"),
                plan.encoder_channels[level - 1],
                &spec_down,
                &mut rng,
            )?);
        }
        let mut expanding = Vec::with_capacity(n);
        let mut width = plan.bottleneck_channels();
        for level in 1..=n {
            // ECB n upsamples back to the input length of CCB N-n+1 and, past
            // the first, fuses the output of that same CCB
            let mirror = n - level + 1;
            let skip = (level > 1).then(|| plan.encoder_channels[mirror]);
            let block = ExpandingBlock::new(
                &mut params,
                &format!("ecb{level}"),
                width,
                skip,
                plan.lengths[mirror - 1],
                &spec_up,
                &mut rng,
            )?;
            width = block.out_channels();
            expanding.push(block);
        }
        let denoise = DenoiseBlock::new(
            &mut params,
            "denoise",
            width,
            config.input_len,
            config.leaky_slope,
            &mut rng,
        )?;
        Ok(SeismoNet {
            config: config.clone(),
            plan,
            params,
            ensemble,
            contracting,
            expanding,
            denoise,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn plan(&self) -> &LevelPlan {
        &self.plan
    }

    pub fn block_count(&self) -> usize {
        2 + self.contracting.len() + self.expanding.len()
    }

    pub fn bottleneck_channels(&self) -> usize {
        self.plan.bottleneck_channels()
    }

    /// Batch-norm running statistics keyed by layer name (`ccb1.bn`, ...).
    pub fn batchnorm_stats(&self) -> Vec<(String, &BatchNormStats<T>)> {
        let c = self
            .contracting
            .iter()
            .enumerate()
            .map(|(i, b)| (format!("ccb{}.bn", i + 1), &b.bn.stats));
        let e = self
            .expanding
            .iter()
            .enumerate()
            .map(|(i, b)| (format!("ecb{}.bn", i + 1), &b.bn.stats));
        c.chain(e).collect()
    }

    pub fn batchnorm_stats_mut(&mut self) -> Vec<(String, &mut BatchNormStats<T>)> {
        let c = self
            .contracting
            .iter_mut()
            .enumerate()
            .map(|(i, b)| (format!("ccb{}.bn", i + 1), &mut b.bn.stats));
        let e = self
            .expanding
            .iter_mut()
            .enumerate()
            .map(|(i, b)| (format!("ecb{}.bn", i + 1), &mut b.bn.stats));
        c.chain(e).collect()
    }

    fn check_input(&self, x: &SignalTensor<T>) -> Result<()> {
        if x.channels() != 1 || x.length() != self.config.input_len {
            return Err(Error::shape(format!(
                "model expects (batch, 1, {}), got {}",
                self.config.input_len,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass that records what [`SeismoNet::backward`] needs.
    pub fn forward(&mut self, x: &SignalTensor<T>, mode: Mode) -> Result<SignalTensor<T>> {
        self.check_input(x)?;
        let params = &self.params;
        let mut h = self.ensemble.forward(x, params, mode)?;
        let mut skips = Vec::with_capacity(self.contracting.len());
        for ccb in &mut self.contracting {
            h = ccb.forward(&h, params, mode)?;
            skips.push(h.clone());
        }
        let n = skips.len();
        for (i, ecb) in self.expanding.iter_mut().enumerate() {
            let skip = (i > 0).then(|| &skips[n - 1 - i]);
            h = ecb.forward(&h, skip, params, mode)?;
        }
        self.denoise.forward(&h, params, mode)
    }

    /// Accumulates parameter gradients from `out.grad` and returns the
    /// input gradient.
    pub fn backward(&mut self, out: &SignalTensor<T>) -> Result<SignalTensor<T>> {
        let params = &mut self.params;
        let n = self.contracting.len();
        let mut g = self.denoise.backward(out, params)?;
        // skip_grads[k] collects gradient flowing into the output of CCB k+1
        let mut skip_grads: Vec<Option<Vec<T>>> = vec![None; n];
        for i in (0..n).rev() {
            let (gx, gs) = self.expanding[i].backward(&g, params)?;
            if let Some(gs) = gs {
                skip_grads[n - 1 - i] = Some(gs.grad);
            }
            g = gx;
        }
        for k in (0..n).rev() {
            if let Some(extra) = &skip_grads[k] {
                for (a, &b) in g.grad.iter_mut().zip(extra) {
                    *a += b;
                }
            }
            g = self.contracting[k].backward(&g, params)?;
        }
        self.ensemble.backward(&g, params)
    }

    /// Inference-mode forward pass; no state is touched.
    pub fn infer(&self, x: &SignalTensor<T>) -> Result<SignalTensor<T>> {
        self.check_input(x)?;
        let params = &self.params;
        let mut h = self.ensemble.infer(x, params)?;
        let mut skips = Vec::with_capacity(self.contracting.len());
        for ccb in &self.contracting {
            h = ccb.infer(&h, params)?;
            skips.push(h.clone());
        }
        let n = skips.len();
        for (i, ecb) in self.expanding.iter().enumerate() {
            let skip = (i > 0).then(|| &skips[n - 1 - i]);
            h = ecb.infer(&h, skip, params)?;
        }
        self.denoise.infer(&h, params)
    }

    /// Predicts one distance-transform row per input window.
    pub fn predict(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let x = SignalTensor::<T>::from_rows(windows)?;
        let y = self.infer(&x)?;
        let len = y.length();
        Ok(y.to_f64_vec().chunks(len).map(<[f64]>::to_vec).collect())
    }

    /// Copies parameters and running statistics into a model of another precision.
    pub fn cast<U: Real>(&self) -> Result<SeismoNet<U>> {
        let mut other = SeismoNet::<U>::new(&self.config, 0)?;
        for ((_, dst), (_, src)) in other.params.iter_mut().zip(self.params.iter()) {
            dst.value = src.value.iter().map(|v| U::lit(v.as_f64())).collect();
        }
        for ((_, dst), (_, src)) in other
            .batchnorm_stats_mut()
            .into_iter()
            .zip(self.batchnorm_stats())
        {
            dst.running_mean = src
                .running_mean
                .iter()
                .map(|v| U::lit(v.as_f64()))
                .collect();
            dst.running_var = src.running_var.iter().map(|v| U::lit(v.as_f64())).collect();
        }
        other.epoch = self.epoch;
        Ok(other)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use rand::Rng;

    use super::*;
    use crate::nn::{grad_check, Shape};

    fn tiny() -> ModelConfig {
        ModelConfig {
            levels: 2,
            first_channels: 4,
            input_len: 64,
            ..ModelConfig::default()
        }
    }

    fn random_input(batch: usize, len: usize, seed: u64) -> SignalTensor<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..batch * len)
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        SignalTensor::from_vec(Shape::new(batch, 1, len), v).unwrap()
    }

    #[test]
    fn default_model_structure() {
        let m = build_model::<f32>(&ModelConfig::default(), 0).unwrap();
        assert_eq!(m.block_count(), 12);
        assert_eq!(m.bottleneck_channels(), 512);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = build_model::<f32>(&tiny(), 9).unwrap();
        let b = build_model::<f32>(&tiny(), 9).unwrap();
        let c = build_model::<f32>(&tiny(), 10).unwrap();
        assert_eq!(a.params.flat_values(), b.params.flat_values());
        assert_ne!(a.params.flat_values(), c.params.flat_values());
    }

    #[test]
    fn infer_matches_inference_forward() {
        let mut m = build_model::<f64>(&tiny(), 1).unwrap();
        let x = random_input(3, 64, 2);
        let a = m.infer(&x).unwrap();
        let b = m.forward(&x, Mode::Inference).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.shape(), Shape::new(3, 1, 64));
    }

    #[test]
    fn tiny_model_gradient_check() {
        let mut m = build_model::<f64>(&tiny(), 4).unwrap();
        // move biases off zero so no activation sits exactly on its kink
        let mut r = ChaCha8Rng::seed_from_u64(8);
        for (_, p) in m.params.iter_mut() {
            p.value
                .iter_mut()
                .for_each(|v| *v += r.random_range(-0.2..0.2));
        }
        let x = random_input(2, 64, 5);
        let n_x = x.values.len();
        let probe: Vec<f64> = random_input(2, 64, 6).values;
        let mut start = x.values.clone();
        start.extend(m.params.flat_values());
        let report = grad_check(
            |point| {
                let input = SignalTensor::from_vec(x.shape(), point[..n_x].to_vec()).unwrap();
                m.params.set_flat_values(&point[n_x..]);
                m.params.zero_grad();
                let mut y = m.forward(&input, Mode::Train).unwrap();
                let value = y.values.iter().zip(&probe).map(|(a, b)| a * b).sum();
                y.grad = probe.clone();
                let mut g = m.backward(&y).unwrap().grad;
                g.extend(m.params.flat_grads());
                (value, g)
            },
            &start,
            1e-3,
        );
        assert!(report.passed(), "{report:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(25))]
        #[test]
        fn output_length_equals_input_length(
            levels in 1usize..4,
            quarter in 1usize..3,
            extra in 0usize..40,
            stride in 2usize..4,
        ) {
            let min = 4 * stride.pow(levels as u32);
            let cfg = ModelConfig {
                levels,
                first_channels: 4 * quarter,
                stride,
                input_len: min + extra,
                ..ModelConfig::default()
            };
            let m = build_model::<f32>(&cfg, 0).unwrap();
            let x = SignalTensor::zeros(Shape::new(1, 1, cfg.input_len));
            prop_assert_eq!(m.infer(&x).unwrap().length(), cfg.input_len);
        }
    }
}
