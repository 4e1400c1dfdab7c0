use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::Tensor;
use crate::error::{LagrError, Result};
use crate::rng::Rng;

/// He initialization: entries drawn from `N(0, 2 / fan_in)`.
pub fn he_init(shape: Vec<usize>, fan_in: usize, rng: &mut Rng) -> Result<Tensor> {
    if fan_in == 0 {
        return Err(LagrError::invalid("he_init needs fan_in >= 1"));
    }
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    let numel = shape.iter().product();
    let data = (0..numel).map(|_| normal.sample(rng) as f32).collect();
    Tensor::new(shape, data)
}

/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, used for dense layers.
pub fn uniform_init(shape: Vec<usize>, fan_in: usize, rng: &mut Rng) -> Result<Tensor> {
    if fan_in == 0 {
        return Err(LagrError::invalid("uniform_init needs fan_in >= 1"));
    }
    let bound = 1.0 / (fan_in as f64).sqrt();
    let numel = shape.iter().product();
    let data = (0..numel)
        .map(|_| rng.random_range(-bound..bound) as f32)
        .collect();
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn variance(xs: &[f32]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
        xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n
    }

    #[test]
    fn he_variance_matches_fan_in() {
        let t = he_init(vec![1000, 1000], 1000, &mut seeded(7)).unwrap();
        let v = variance(t.data());
        assert!((v - 0.002).abs() / 0.002 < 0.10, "variance {v}");

        let t = he_init(vec![1_000_000], 2, &mut seeded(8)).unwrap();
        let v = variance(t.data());
        assert!((v - 1.0).abs() < 0.10, "variance {v}");
    }

    #[test]
    fn he_is_deterministic_under_seed() {
        let a = he_init(vec![16, 8], 8, &mut seeded(42)).unwrap();
        let b = he_init(vec![16, 8], 8, &mut seeded(42)).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn zero_fan_in_rejected() {
        assert!(he_init(vec![2], 0, &mut seeded(1)).is_err());
    }
}
