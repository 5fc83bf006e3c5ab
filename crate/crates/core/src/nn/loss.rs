use super::real::Real;
use super::tensor::SignalTensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Average over every element of the batch.
    Mean,
    /// Sum over every element.
    Sum,
    /// Per-window average, summed over the windows of the batch.
    #[default]
    WindowSum,
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Reduction::Mean),
            "sum" => Ok(Reduction::Sum),
            "window_sum" => Ok(Reduction::WindowSum),
            other => Err(Error::config(
                "train.reduction",
                format!("expected `mean`, `sum` or `window_sum`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Reduction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Reduction::Mean => "mean",
            Reduction::Sum => "sum",
            Reduction::WindowSum => "window_sum",
        })
    }
}

/// `0.5 x^2` for `|x| < 1`, `|x| - 0.5` otherwise.
#[inline]
pub fn smooth_l1<T: Real>(x: T) -> T {
    let a = x.abs();
    if a < T::one() {
        T::lit(0.5) * x * x
    } else {
        a - T::lit(0.5)
    }
}

#[inline]
pub fn smooth_l1_grad<T: Real>(x: T) -> T {
    if x.abs() < T::one() {
        x
    } else {
        x.signum()
    }
}

/// Smooth-L1 of `pred - target`, reduced. Writes dL/dpred into `pred.grad`.
pub fn smooth_l1_loss<T: Real>(
    pred: &mut SignalTensor<T>,
    target: &SignalTensor<T>,
    reduction: Reduction,
) -> Result<T> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "prediction {} vs target {}",
            pred.shape(),
            target.shape()
        )));
    }
    let scale = match reduction {
        Reduction::Mean => T::one() / T::lit(pred.values.len() as f64),
        Reduction::Sum => T::one(),
        Reduction::WindowSum => T::one() / T::lit(pred.length() as f64),
    };
    let mut total = T::zero();
    for ((g, &p), &t) in pred.grad.iter_mut().zip(&pred.values).zip(&target.values) {
        let d = p - t;
        total += smooth_l1(d);
        *g = smooth_l1_grad(d) * scale;
    }
    Ok(total * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Shape;

    fn t(v: Vec<f64>) -> SignalTensor<f64> {
        SignalTensor::from_vec(Shape::new(1, 1, v.len()), v).unwrap()
    }

    #[test]
    fn identical_inputs_have_zero_loss() {
        let mut p = t(vec![1.0, -2.0, 3.5]);
        let target = p.clone();
        assert_eq!(
            smooth_l1_loss(&mut p, &target, Reduction::Mean).unwrap(),
            0.0
        );
        assert!(p.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn quadratic_and_linear_branches() {
        let mut p = t(vec![0.5]);
        assert_eq!(
            smooth_l1_loss(&mut p, &t(vec![0.0]), Reduction::Sum).unwrap(),
            0.125
        );
        let mut p = t(vec![2.0]);
        assert_eq!(
            smooth_l1_loss(&mut p, &t(vec![0.0]), Reduction::Sum).unwrap(),
            1.5
        );
        assert_eq!(p.grad, vec![1.0]);
    }

    #[test]
    fn mean_divides_by_element_count() {
        let mut p = t(vec![2.0, 0.0, 0.5, -3.0]);
        let loss = smooth_l1_loss(&mut p, &t(vec![0.0; 4]), Reduction::Mean).unwrap();
        assert_eq!(loss, (1.5 + 0.0 + 0.125 + 2.5) / 4.0);
        assert_eq!(p.grad, vec![0.25, 0.0, 0.125, -0.25]);
    }

    #[test]
    fn window_sum_averages_within_windows() {
        let mut p = SignalTensor::from_vec(Shape::new(2, 1, 2), vec![2.0, 0.0, 0.5, 0.0]).unwrap();
        let target = SignalTensor::zeros(Shape::new(2, 1, 2));
        let loss = smooth_l1_loss(&mut p, &target, Reduction::WindowSum).unwrap();
        assert_eq!(loss, 1.5 / 2.0 + 0.125 / 2.0);
        assert_eq!(p.grad, vec![0.5, 0.0, 0.25, 0.0]);
        assert_eq!(
            "window_sum".parse::<Reduction>().unwrap(),
            Reduction::WindowSum
        );
    }

    #[test]
    fn continuous_symmetric_nonnegative() {
        assert_eq!(smooth_l1(1.0f64), 0.5);
        assert!((smooth_l1(1.0f64 - 1e-12) - 0.5).abs() < 1e-11);
        for i in -50..=50 {
            let x = i as f64 * 0.13;
            assert_eq!(smooth_l1(x), smooth_l1(-x));
            assert!(smooth_l1(x) >= 0.0);
            assert_eq!(smooth_l1(x) == 0.0, x == 0.0);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = t(vec![1.0, 2.0]);
        assert!(smooth_l1_loss(&mut p, &t(vec![1.0]), Reduction::Mean).is_err());
    }
}
