use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::real::Real;
use crate::tensor::Tensor;

/// Uniform fan-in initialization: values in `(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
/// used for convolution and linear weights and their biases.
pub fn uniform_fan_in<R: Real>(rng: &mut ChaCha12Rng, shape: &[usize], fan_in: usize) -> Tensor<R> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    uniform(rng, shape, bound)
}

/// Uniform in `(-bound, bound)`; GRU gates use `bound = 1/sqrt(hidden)`.
pub fn uniform<R: Real>(rng: &mut ChaCha12Rng, shape: &[usize], bound: f64) -> Tensor<R> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| R::from_f64(rng.random_range(-bound..bound))).collect();
    Tensor::from_vec(shape, data)
}

pub fn constant<R: Real>(shape: &[usize], value: f64) -> Tensor<R> {
    Tensor::full(shape, R::from_f64(value))
}
