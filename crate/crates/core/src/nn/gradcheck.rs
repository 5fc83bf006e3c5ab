//! Central-difference gradient verification in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{Layer, Mode};
use super::params::ParamStore;
use super::tensor::SignalTensor;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max_i |g_a - g_n| / max(|g_a|, |g_n|, 1e-8)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub coordinates: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Compares the analytic gradient returned by `f` at `inputs` with central
/// differences using `h = 1e-5 * max(1, |x_i|)` per coordinate.
///
/// `f` maps a point to `(value, gradient)`.
pub fn grad_check<F>(mut f: F, inputs: &[f64], tolerance: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(inputs);
    assert_eq!(analytic.len(), inputs.len(), "gradient length");
    let mut point = inputs.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        coordinates: inputs.len(),
        tolerance,
    };
    for i in 0..inputs.len() {
        let h = 1e-5 * inputs[i].abs().max(1.0);
        point[i] = inputs[i] + h;
        let (plus, _) = f(&point);
        point[i] = inputs[i] - h;
        let (minus, _) = f(&point);
        point[i] = inputs[i];
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        let err = (analytic[i] - numeric).abs() / denom;
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    report
}

/// Gradient check of a layer with respect to its input and every parameter
/// in `params`, through the scalar objective `sum(r * layer(x))` with a
/// fixed random probe `r`.
pub fn check_layer<L: Layer<f64>>(
    layer: &mut L,
    params: &mut ParamStore<f64>,
    x: &SignalTensor<f64>,
    mode: Mode,
    seed: u64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let out_len = layer.forward(x, params, mode)?.values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n_x = x.values.len();

    let mut start = x.values.clone();
    start.extend(params.flat_values());

    let mut failure = None;
    let report = grad_check(
        |point| match eval_layer(layer, params, x, mode, &probe, point, n_x) {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(e);
                (f64::NAN, vec![f64::NAN; point.len()])
            }
        },
        &start,
        tolerance,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn eval_layer<L: Layer<f64>>(
    layer: &mut L,
    params: &mut ParamStore<f64>,
    x: &SignalTensor<f64>,
    mode: Mode,
    probe: &[f64],
    point: &[f64],
    n_x: usize,
) -> Result<(f64, Vec<f64>)> {
    let input = SignalTensor::from_vec(x.shape(), point[..n_x].to_vec())?;
    params.set_flat_values(&point[n_x..]);
    params.zero_grad();
    let mut y = layer.forward(&input, params, mode)?;
    let value = y.values.iter().zip(probe).map(|(a, b)| a * b).sum();
    y.grad = probe.to_vec();
    let gx = layer.backward(&y, params)?;
    let mut grad = gx.grad;
    grad.extend(params.flat_grads());
    Ok((value, grad))
}
