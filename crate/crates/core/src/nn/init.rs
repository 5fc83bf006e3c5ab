use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::real::Real;
use crate::error::{Error, Result};

/// Half-width `sqrt(6 / (fan_in + fan_out))` of the Xavier uniform law.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `n` i.i.d. draws from `U[-a, a]` with `a` the Xavier bound.
pub fn xavier_uniform<T: Real, R: Rng + ?Sized>(
    n: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Vec<T> {
    let a = xavier_bound(fan_in, fan_out);
    (0..n).map(|_| T::lit(rng.random_range(-a..=a))).collect()
}

/// Seeded Xavier buffer for a parameter of the given dims.
pub fn xavier_uniform_init(
    dims: &[usize],
    fan_in: usize,
    fan_out: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::validation("xavier fans must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(xavier_uniform(
        dims.iter().product(),
        fan_in,
        fan_out,
        &mut rng,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_bound_when_fans_are_three() {
        assert_eq!(xavier_bound(3, 3), 1.0);
        let w = xavier_uniform_init(&[4, 3, 5], 3, 3, 7).unwrap();
        assert_eq!(w.len(), 60);
        assert!(w.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn seeded_buffers_repeat() {
        let a = xavier_uniform_init(&[100], 10, 20, 42).unwrap();
        let b = xavier_uniform_init(&[100], 10, 20, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, xavier_uniform_init(&[100], 10, 20, 43).unwrap());
    }

    #[test]
    fn empirical_law_matches_uniform() {
        let (fan_in, fan_out) = (96, 160);
        let a = xavier_bound(fan_in, fan_out);
        let w = xavier_uniform_init(&[100_000], fan_in, fan_out, 1).unwrap();
        let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!(max <= a);
        assert!(mean.abs() < 0.01 * a, "mean {mean}");
        // variance of U[-a, a] is a^2 / 3
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
        assert!((var - a * a / 3.0).abs() < 0.02 * a * a);
    }

    #[test]
    fn zero_fan_is_rejected() {
        assert!(xavier_uniform_init(&[3], 0, 3, 0).is_err());
    }
}
