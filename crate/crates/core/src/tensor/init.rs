use rand::Rng;

use super::{Real, Tensor};

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`, drawn row-major from `rng`.
pub fn glorot_uniform<T: Real, R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of_f64(rng.gen_range(-limit..=limit))).collect();
    Tensor::new(shape.to_vec(), data).expect("non-empty shape")
}
