use super::params::ParamStore;
use super::real::Real;
use crate::error::{Error, Result};

/// Plain SGD: `p <- p - lr * grad` for every parameter, then zero the gradients.
/// Nothing is updated if any gradient is non-finite.
pub fn sgd_step<T: Real>(params: &mut ParamStore<T>, lr: T) -> Result<()> {
    for (name, p) in params.iter() {
        if let Some(i) = p.grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of `{name}`[{i}] is {}",
                p.grad[i]
            )));
        }
    }
    for (_, p) in params.iter_mut() {
        for (v, g) in p.value.iter_mut().zip(p.grad.iter_mut()) {
            *v -= lr * *g;
            *g = T::zero();
        }
    }
    Ok(())
}

/// Step decay: `lr0 / factor^floor(epoch / step)`.
pub fn lr_schedule(epoch: usize, lr0: f64, step: usize, factor: f64) -> f64 {
    let drops = (epoch / step.max(1)) as i32;
    lr0 / factor.powi(drops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Param;

    fn store(v: f64, g: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let id = s.insert("p", Param::new(vec![1], vec![v])).unwrap();
        s.get_mut(id).grad[0] = g;
        s
    }

    #[test]
    fn single_update() {
        let mut s = store(1.0, 2.0);
        sgd_step(&mut s, 0.1).unwrap();
        let p = s.by_name("p").unwrap();
        assert!((p.value[0] - 0.8).abs() < 1e-15);
        assert_eq!(p.grad[0], 0.0);
    }

    #[test]
    fn zero_rate_keeps_values() {
        let mut s = store(1.25, -7.0);
        sgd_step(&mut s, 0.0).unwrap();
        assert_eq!(s.by_name("p").unwrap().value[0], 1.25);
    }

    #[test]
    fn quadratic_converges() {
        // d/dp (p - 3)^2 = 2 (p - 3); each step contracts the error by |1 - 2 lr| = 0.2
        let mut s = store(0.0, 0.0);
        for _ in 0..50 {
            let p = s.by_name("p").unwrap().value[0];
            s.by_name_mut("p").unwrap().grad[0] = 2.0 * (p - 3.0);
            sgd_step(&mut s, 0.4).unwrap();
        }
        assert!((s.by_name("p").unwrap().value[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let mut s = store(1.0, f64::NAN);
        assert!(matches!(sgd_step(&mut s, 0.1), Err(Error::NonFinite(_))));
        assert_eq!(s.by_name("p").unwrap().value[0], 1.0);
    }

    #[test]
    fn step_schedule() {
        assert_eq!(lr_schedule(0, 0.001, 100, 10.0), 0.001);
        assert_eq!(lr_schedule(99, 0.001, 100, 10.0), 0.001);
        assert!((lr_schedule(100, 0.001, 100, 10.0) - 0.0001).abs() < 1e-18);
        assert!((lr_schedule(250, 0.001, 100, 10.0) - 0.00001).abs() < 1e-19);
        let mut prev = f64::INFINITY;
        for e in 0..400 {
            let lr = lr_schedule(e, 0.001, 100, 10.0);
            assert!(lr <= prev);
            if e % 100 != 0 {
                assert_eq!(lr, prev);
            }
            prev = lr;
        }
    }
}
