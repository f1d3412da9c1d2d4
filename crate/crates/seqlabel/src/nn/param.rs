//! Learned parameter tensors with paired gradient accumulators.

use super::rng::RngStream;
use crate::Real;

/// A dense tensor of parameters plus a gradient buffer of the same shape.
///
/// Weights are initialized uniformly in `[-r, r]` with
/// `r = sqrt(6 / (fan_in + fan_out))`; biases start at zero except the
/// forget-gate bias, which starts at 1 so early cell memory survives.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    shape: Vec<usize>,
    pub values: Vec<Real>,
    pub grad: Vec<Real>,
    pub trainable: bool,
}

impl ParamTensor {
    fn filled(shape: Vec<usize>, value: Real, trainable: bool) -> Self {
        let len = shape.iter().product();
        ParamTensor {
            shape,
            values: vec![value; len],
            grad: vec![0.0; len],
            trainable,
        }
    }

    /// Weight with explicit fan sizes (for tensors whose storage layout does
    /// not coincide with the fan-in/fan-out view, e.g. the byte projection).
    pub fn weight_with_fans(
        shape: Vec<usize>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut RngStream,
    ) -> Self {
        let r = (6.0 / (fan_in + fan_out) as Real).sqrt();
        let mut t = Self::filled(shape, 0.0, true);
        for v in &mut t.values {
            *v = rng.range(-r, r);
        }
        t
    }

    /// `rows x cols` weight matrix mapping a `cols`-vector to a `rows`-vector.
    pub fn weight(rows: usize, cols: usize, rng: &mut RngStream) -> Self {
        Self::weight_with_fans(vec![rows, cols], cols, rows, rng)
    }

    /// Weight vector (fan-out 1), used for the trainable unknown-word vector.
    pub fn weight_vec(len: usize, rng: &mut RngStream) -> Self {
        Self::weight_with_fans(vec![len], len, 1, rng)
    }

    pub fn bias(len: usize) -> Self {
        Self::filled(vec![len], 0.0, true)
    }

    /// Forget-gate bias, initialized to one.
    pub fn forget_bias(len: usize) -> Self {
        Self::filled(vec![len], 1.0, true)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        Self::filled(shape, 0.0, true)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_entries_within_glorot_bound() {
        let mut rng = RngStream::from_seed(1);
        let w = ParamTensor::weight(4, 6, &mut rng);
        let r = (6.0 / 10.0 as Real).sqrt();
        assert_eq!(w.shape(), &[4, 6]);
        assert!(w.values.iter().all(|v| v.abs() <= r));
        // Seeded draws must not all collapse to one value.
        assert!(w.values.iter().any(|v| *v != w.values[0]));
    }

    #[test]
    fn biases_zero_forget_bias_one() {
        let b = ParamTensor::bias(5);
        assert!(b.values.iter().all(|v| *v == 0.0));
        let f = ParamTensor::forget_bias(5);
        assert!(f.values.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn fixed_seed_reproduces_tensor() {
        let mut a = RngStream::from_seed(9);
        let mut b = RngStream::from_seed(9);
        let wa = ParamTensor::weight(3, 3, &mut a);
        let wb = ParamTensor::weight(3, 3, &mut b);
        assert_eq!(wa.values, wb.values);
    }
}
