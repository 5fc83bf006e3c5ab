use super::layer::{Cache, Layer, Mode};
use super::params::ParamStore;
use super::real::Real;
use super::tensor::SignalTensor;
use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// `y = x` for `x >= 0`, `slope * x` otherwise.
pub fn leaky_relu<T: Real>(x: &SignalTensor<T>, slope: T) -> Result<SignalTensor<T>> {
    if slope < T::zero() {
        return Err(Error::validation("leaky relu slope must be >= 0"));
    }
    Ok(x.map(|v| if v >= T::zero() { v } else { slope * v }))
}

/// Derivative 1 for `x > 0`, `slope` for `x <= 0`.
#[inline]
pub fn leaky_relu_grad<T: Real>(x: T, slope: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        slope
    }
}

#[derive(Clone, Debug)]
pub struct LeakyRelu<T> {
    pub slope: T,
    cache: Cache<T>,
}

impl<T: Real> LeakyRelu<T> {
    pub fn new(slope: T) -> Self {
        LeakyRelu {
            slope,
            cache: Cache::default(),
        }
    }
}

impl<T: Real> Layer<T> for LeakyRelu<T> {
    fn forward(
        &mut self,
        x: &SignalTensor<T>,
        _params: &ParamStore<T>,
        _mode: Mode,
    ) -> Result<SignalTensor<T>> {
        self.cache.store(x);
        leaky_relu(x, self.slope)
    }

    fn backward(
        &mut self,
        out: &SignalTensor<T>,
        _params: &mut ParamStore<T>,
    ) -> Result<SignalTensor<T>> {
        let x = self.cache.take()?;
        let gx = x
            .values
            .iter()
            .zip(&out.grad)
            .map(|(&v, &g)| g * leaky_relu_grad(v, self.slope))
            .collect();
        Ok(x.with_grad(gx))
    }

    fn infer(&self, x: &SignalTensor<T>, _params: &ParamStore<T>) -> Result<SignalTensor<T>> {
        leaky_relu(x, self.slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Shape;

    fn t(v: Vec<f64>) -> SignalTensor<f64> {
        SignalTensor::from_vec(Shape::new(1, 1, v.len()), v).unwrap()
    }

    #[test]
    fn positive_passes_negative_scales() {
        assert_eq!(leaky_relu(&t(vec![2.0]), 0.01).unwrap().values, vec![2.0]);
        assert_eq!(
            leaky_relu(&t(vec![-1.0]), 0.01).unwrap().values,
            vec![-0.01]
        );
    }

    #[test]
    fn unit_slope_is_identity() {
        let x = t(vec![-3.0, -0.5, 0.0, 0.25, 8.0]);
        assert_eq!(leaky_relu(&x, 1.0).unwrap().values, x.values);
    }

    #[test]
    fn gradient_at_zero_is_slope() {
        assert_eq!(leaky_relu_grad(0.0, 0.2), 0.2);
        assert_eq!(leaky_relu_grad(1e-9, 0.2), 1.0);
        assert!(leaky_relu(&t(vec![1.0]), -0.1).is_err());
    }
}
