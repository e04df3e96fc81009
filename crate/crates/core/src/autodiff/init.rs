use rand::Rng as _;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Glorot-uniform draw in `±sqrt(6 / (fan_in + fan_out))`.
///
/// A matrix `[fan_in, fan_out]` uses its two dims; a vector of length `n` is
/// treated as `[1, n]`.
pub fn init_params(shape: &[usize], rng: &mut Rng) -> Result<Tensor> {
    let (fan_in, fan_out) = match *shape {
        [n] => (1, n),
        [a, b] => (a, b),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "init_params expects rank 1 or 2, got {shape:?}"
            )))
        }
    };
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidArgument(format!("non-positive dims {shape:?}")));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::new(shape.to_vec(), data)
}

pub(crate) fn dropout_mask(shape: &[usize], rate: f64, rng: &mut Rng) -> Tensor {
    let keep = 1.0 / (1.0 - rate);
    let data = (0..shape.iter().product())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("mask shape")
}

/// Inverted dropout on a plain tensor; identity when `training` is false.
pub fn dropout(x: &Tensor, rate: f64, rng: &mut Rng, training: bool) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.shape(), rate, rng);
    let data = x.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
    Tensor::new(x.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn same_seed_same_tensor() {
        let a = init_params(&[7, 5], &mut from_seed(42)).unwrap();
        let b = init_params(&[7, 5], &mut from_seed(42)).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn one_by_one_bound() {
        let mut rng = from_seed(3);
        for _ in 0..1000 {
            let w = init_params(&[1, 1], &mut rng).unwrap();
            assert!(w.item().abs() <= 3f64.sqrt());
        }
    }

    #[test]
    fn mean_is_near_zero() {
        let w = init_params(&[100, 100], &mut from_seed(9)).unwrap();
        let mean = w.data().iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn dropout_rates() {
        let x = Tensor::full(&[100_000], 1.0);
        let mut rng = from_seed(5);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).unwrap(), x);
        assert_eq!(dropout(&x, 0.7, &mut rng, false).unwrap(), x);
        let y = dropout(&x, 0.5, &mut rng, true).unwrap();
        let survivors = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / 1e5;
        assert!((survivors - 0.5).abs() < 0.01, "{survivors}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
        assert!(dropout(&x, 1.0, &mut rng, true).is_err());
    }
}
