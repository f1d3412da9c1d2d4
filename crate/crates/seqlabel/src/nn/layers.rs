//! Linear scoring layer and inverted dropout.

use super::math::{matvec_acc, matvec_t_acc, outer_acc};
use super::param::ParamTensor;
use super::rng::RngStream;
use super::NnError;
use crate::Real;

/// Affine map from Bi-LSTM outputs to per-label scores; no activation.
#[derive(Debug, Clone)]
pub struct LinearParams {
    pub w: ParamTensor,
    pub b: ParamTensor,
    pub out_dim: usize,
    pub in_dim: usize,
}

impl LinearParams {
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut RngStream) -> Self {
        LinearParams {
            w: ParamTensor::weight(out_dim, in_dim, rng),
            b: ParamTensor::bias(out_dim),
            out_dim,
            in_dim,
        }
    }

    pub fn forward(&self, x: &[Real]) -> Vec<Real> {
        let mut y = self.b.values.clone();
        matvec_acc(&self.w.values, self.out_dim, self.in_dim, x, &mut y);
        y
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: &[Real], dy: &[Real]) -> Vec<Real> {
        outer_acc(&mut self.w.grad, self.out_dim, self.in_dim, dy, x);
        for (bg, d) in self.b.grad.iter_mut().zip(dy) {
            *bg += d;
        }
        let mut dx = vec![0.0; self.in_dim];
        matvec_t_acc(&self.w.values, self.out_dim, self.in_dim, dy, &mut dx);
        dx
    }

    pub(crate) fn tensors(&self, prefix: &str) -> Vec<(String, &ParamTensor)> {
        vec![
            (format!("{prefix}.w"), &self.w),
            (format!("{prefix}.b"), &self.b),
        ]
    }

    pub(crate) fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut ParamTensor)> {
        vec![
            (format!("{prefix}.w"), &mut self.w),
            (format!("{prefix}.b"), &mut self.b),
        ]
    }
}

/// Draws an inverted-dropout mask: each entry is `0` with probability `rate`
/// and `1/(1-rate)` otherwise. Multiplying by the mask is the whole forward
/// *and* backward story, which keeps replayed masks trivially consistent.
pub fn dropout_mask(len: usize, rate: Real, rng: &mut RngStream) -> Vec<Real> {
    debug_assert!((0.0..1.0).contains(&rate));
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep_scale = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.unit() < rate { 0.0 } else { keep_scale })
        .collect()
}

/// Inverted dropout over one vector. Identity at inference and for rate 0.
pub fn dropout(
    x: &[Real],
    rate: Real,
    rng: &mut RngStream,
    training: bool,
) -> Result<Vec<Real>, NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::DropoutRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok(x.to_vec());
    }
    let mask = dropout_mask(x.len(), rate, rng);
    Ok(x.iter().zip(&mask).map(|(v, m)| v * m).collect())
}
