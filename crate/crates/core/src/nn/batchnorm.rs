use super::layer::{Layer, Mode};
use super::params::{Param, ParamId, ParamStore};
use super::real::Real;
use super::tensor::SignalTensor;
use crate::error::{Error, Result};

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPS: f64 = 1e-5;

/// Per-channel running statistics of a batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormStats<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

impl<T: Real> BatchNormStats<T> {
    pub fn new(channels: usize) -> Self {
        BatchNormStats {
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::lit(DEFAULT_MOMENTUM),
            eps: T::lit(DEFAULT_EPS),
        }
    }
}

/// Quantities saved by the forward pass for the backward pass.
#[derive(Clone, Debug)]
struct Saved<T> {
    x_hat: Vec<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

/// Batch normalization over `(batch, length)` per channel.
///
/// Training mode normalizes with the biased batch variance and folds the
/// unbiased variance into the running estimate; inference mode uses the
/// running statistics.
pub fn batchnorm1d<T: Real>(
    x: &SignalTensor<T>,
    gamma: &[T],
    beta: &[T],
    stats: &mut BatchNormStats<T>,
    mode: Mode,
) -> Result<SignalTensor<T>> {
    forward_impl(x, gamma, beta, stats, mode).map(|(y, _)| y)
}

fn forward_impl<T: Real>(
    x: &SignalTensor<T>,
    gamma: &[T],
    beta: &[T],
    stats: &mut BatchNormStats<T>,
    mode: Mode,
) -> Result<(SignalTensor<T>, Saved<T>)> {
    let c_count = x.channels();
    if gamma.len() != c_count || beta.len() != c_count || stats.running_mean.len() != c_count {
        return Err(Error::shape(format!(
            "batch norm over {} channels applied to {} channels",
            gamma.len(),
            c_count
        )));
    }
    let m = x.batch() * x.length();
    if mode == Mode::Train && m < 2 {
        return Err(Error::validation(
            "batch norm in training mode needs at least 2 values per channel",
        ));
    }
    let mut y = SignalTensor::zeros(x.shape());
    let mut x_hat = vec![T::zero(); x.values.len()];
    let mut inv_std = vec![T::zero(); c_count];
    let mf = T::lit(m as f64);
    for c in 0..c_count {
        let (mean, var) = match mode {
            Mode::Train => {
                let mut sum = T::zero();
                for b in 0..x.batch() {
                    sum += x.row(b, c).iter().fold(T::zero(), |a, &v| a + v);
                }
                let mean = sum / mf;
                let mut sq = T::zero();
                for b in 0..x.batch() {
                    sq += x
                        .row(b, c)
                        .iter()
                        .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
                }
                let var = sq / mf;
                let mom = stats.momentum;
                stats.running_mean[c] = (T::one() - mom) * stats.running_mean[c] + mom * mean;
                let unbiased = sq / T::lit((m - 1) as f64);
                stats.running_var[c] = (T::one() - mom) * stats.running_var[c] + mom * unbiased;
                (mean, var)
            }
            Mode::Inference => (stats.running_mean[c], stats.running_var[c]),
        };
        let inv = T::one() / (var + stats.eps).sqrt();
        inv_std[c] = inv;
        for b in 0..x.batch() {
            let o = x.offset(b, c);
            for t in 0..x.length() {
                let h = (x.values[o + t] - mean) * inv;
                x_hat[o + t] = h;
                y.values[o + t] = gamma[c] * h + beta[c];
            }
        }
    }
    Ok((
        y,
        Saved {
            x_hat,
            inv_std,
            mode,
        },
    ))
}

fn backward_impl<T: Real>(
    out: &SignalTensor<T>,
    saved: &Saved<T>,
    gamma: &[T],
    g_gamma: &mut [T],
    g_beta: &mut [T],
) -> Vec<T> {
    let mut gx = vec![T::zero(); out.values.len()];
    let m = T::lit((out.batch() * out.length()) as f64);
    for c in 0..out.channels() {
        let mut sum_g = T::zero();
        let mut sum_gh = T::zero();
        for b in 0..out.batch() {
            let o = out.offset(b, c);
            for t in 0..out.length() {
                let g = out.grad[o + t];
                sum_g += g;
                sum_gh += g * saved.x_hat[o + t];
            }
        }
        g_gamma[c] += sum_gh;
        g_beta[c] += sum_g;
        let scale = gamma[c] * saved.inv_std[c];
        for b in 0..out.batch() {
            let o = out.offset(b, c);
            for t in 0..out.length() {
                let g = out.grad[o + t];
                gx[o + t] = match saved.mode {
                    Mode::Train => scale * (g - sum_g / m - saved.x_hat[o + t] * sum_gh / m),
                    Mode::Inference => scale * g,
                };
            }
        }
    }
    gx
}

/// Batch-norm layer: `{name}.gamma` and `{name}.beta` live in the store,
/// running statistics live here.
#[derive(Clone, Debug)]
pub struct BatchNorm1d<T> {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub stats: BatchNormStats<T>,
    saved: Option<(SignalTensor<T>, Saved<T>)>,
}

impl<T: Real> BatchNorm1d<T> {
    pub fn new(store: &mut ParamStore<T>, name: &str, channels: usize) -> Result<Self> {
        let gamma = store.insert(
            format!("{name}.gamma"),
            Param::new(vec![channels], vec![T::one(); channels]),
        )?;
        let beta = store.insert(format!("{name}.beta"), Param::zeros(vec![channels]))?;
        Ok(BatchNorm1d {
            gamma,
            beta,
            stats: BatchNormStats::new(channels),
            saved: None,
        })
    }
}

impl<T: Real> Layer<T> for BatchNorm1d<T> {
    fn forward(
        &mut self,
        x: &SignalTensor<T>,
        params: &ParamStore<T>,
        mode: Mode,
    ) -> Result<SignalTensor<T>> {
        let (y, saved) = forward_impl(
            x,
            &params.get(self.gamma).value,
            &params.get(self.beta).value,
            &mut self.stats,
            mode,
        )?;
        let mut kept = x.clone();
        kept.zero_grad();
        self.saved = Some((kept, saved));
        Ok(y)
    }

    fn backward(
        &mut self,
        out: &SignalTensor<T>,
        params: &mut ParamStore<T>,
    ) -> Result<SignalTensor<T>> {
        let (x, saved) = self
            .saved
            .take()
            .ok_or_else(|| Error::validation("batch norm backward without forward"))?;
        let gamma = params.get(self.gamma).value.clone();
        let mut g_gamma = std::mem::take(&mut params.get_mut(self.gamma).grad);
        let mut g_beta = std::mem::take(&mut params.get_mut(self.beta).grad);
        let gx = backward_impl(out, &saved, &gamma, &mut g_gamma, &mut g_beta);
        params.get_mut(self.gamma).grad = g_gamma;
        params.get_mut(self.beta).grad = g_beta;
        Ok(x.with_grad(gx))
    }

    fn infer(&self, x: &SignalTensor<T>, params: &ParamStore<T>) -> Result<SignalTensor<T>> {
        let mut stats = self.stats.clone();
        batchnorm1d(
            x,
            &params.get(self.gamma).value,
            &params.get(self.beta).value,
            &mut stats,
            Mode::Inference,
        )
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::tensor::Shape;

    #[test]
    fn constant_input_normalizes_to_zero() {
        let x = SignalTensor::from_vec(Shape::new(2, 1, 4), vec![3.0f64; 8]).unwrap();
        let mut stats = BatchNormStats::new(1);
        let y = batchnorm1d(&x, &[1.0], &[0.0], &mut stats, Mode::Train).unwrap();
        assert!(y.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_gamma_outputs_beta() {
        let x = SignalTensor::from_vec(Shape::new(1, 2, 3), vec![1.0f64, 5.0, -2.0, 0.0, 4.0, 9.0])
            .unwrap();
        let mut stats = BatchNormStats::new(2);
        let y = batchnorm1d(&x, &[0.0, 0.0], &[2.5, -1.0], &mut stats, Mode::Train).unwrap();
        assert_eq!(y.values, vec![2.5, 2.5, 2.5, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn training_output_has_zero_mean_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = Shape::new(4, 3, 50);
        let x = SignalTensor::from_vec(
            shape,
            (0..shape.numel())
                .map(|_| rng.random_range(-3.0..7.0))
                .collect(),
        )
        .unwrap();
        let mut stats = BatchNormStats::new(3);
        let y = batchnorm1d(&x, &[1.0; 3], &[0.0; 3], &mut stats, Mode::Train).unwrap();
        for c in 0..3 {
            let vals: Vec<f64> = (0..4).flat_map(|b| y.row(b, c).to_vec()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let xs: Vec<f64> = (0..4).flat_map(|b| x.row(b, c).to_vec()).collect();
            let xm = xs.iter().sum::<f64>() / n;
            let xvar = xs.iter().map(|v| (v - xm).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() <= DEFAULT_EPS / (xvar + DEFAULT_EPS) + 1e-12);
        }
        assert!(stats.running_var.iter().all(|&v| v >= 0.0));
        assert!(stats.running_mean.iter().all(|&v| v != 0.0));
    }

    #[test]
    fn single_value_per_channel_is_rejected_in_training() {
        let x = SignalTensor::from_vec(Shape::new(1, 1, 1), vec![1.0f64]).unwrap();
        let mut stats = BatchNormStats::new(1);
        assert!(batchnorm1d(&x, &[1.0], &[0.0], &mut stats, Mode::Train).is_err());
        assert!(batchnorm1d(&x, &[1.0], &[0.0], &mut stats, Mode::Inference).is_ok());
    }
}
