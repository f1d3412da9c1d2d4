//! Differentiable building blocks.
//!
//! Every forward operation here has a matching hand-derived backward pass;
//! the contract, enforced by the gradient-check suite, is agreement with
//! central finite differences on the full loss.

mod layers;
mod lstm;
pub(crate) mod math;
mod param;
mod rng;

pub use layers::{dropout, dropout_mask, LinearParams};
pub use lstm::{BiLstmTrace, BiLSTMParams, LSTMParams, LstmTrace};
pub use param::ParamTensor;
pub use rng::RngStream;

use crate::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, found {found} ({context})")]
    Shape {
        expected: usize,
        found: usize,
        context: &'static str,
    },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("dropout rate {0} outside [0, 1)")]
    DropoutRate(Real),
}

/// Concatenates the last forward and last backward outputs of a Bi-LSTM run
/// over a word's byte projections into one fixed-size byte embedding.
pub fn byte_embed(params: &BiLSTMParams, projections: &[Vec<Real>]) -> Result<Vec<Real>, NnError> {
    let trace = params.forward_trace(projections)?;
    Ok(trace.last_concat())
}

/// Concatenates a byte embedding and a word embedding into a joint embedding.
/// Either part may be empty when the corresponding input kind is ablated.
pub fn joint_embed(byte_part: &[Real], word_part: &[Real]) -> Vec<Real> {
    let mut je = Vec::with_capacity(byte_part.len() + word_part.len());
    je.extend_from_slice(byte_part);
    je.extend_from_slice(word_part);
    je
}

/// Runs the word Bi-LSTM over joint embeddings and applies the linear layer,
/// producing one unnormalized score row per token.
pub fn word_scores(
    word_lstm: &BiLSTMParams,
    linear: &LinearParams,
    joint: &[Vec<Real>],
) -> Result<crate::crf::ScoreMatrix, NnError> {
    let outputs = word_lstm.run(joint)?;
    let rows: Vec<Vec<Real>> = outputs.iter().map(|h| linear.forward(h)).collect();
    Ok(crate::crf::ScoreMatrix::from_rows(rows))
}
