//! End-to-end neural sequence labeling.
//!
//! Words are encoded twice: a byte-level Bi-LSTM reads the UTF-8 bytes of
//! each word (morphology), and a frozen pre-trained table supplies word
//! embeddings (semantics). The concatenated joint embeddings feed a
//! word-level Bi-LSTM whose per-token scores are decoded either with a
//! linear-chain CRF (Viterbi) or with independent per-token softmaxes.
//! Everything is trained with exact reverse-mode gradients written by hand;
//! there is no external autodiff.
//!
//! The crate is organized along the pipeline:
//!
//! * [`corpus`] — CoNLL column files, tagging-scheme conversion, dev splits
//! * [`embeddings`] — word-vector tables and byte projections
//! * [`nn`] — LSTM cells, Bi-LSTMs, linear layer, dropout, initialization
//! * [`crf`] — path scores, log-partition, NLL gradients, Viterbi
//! * [`model`] — the assembled tagger and its parameter registry
//! * [`train`] — Adam, staircase decay, dedup batching, early stopping
//! * [`eval`] — entity-level precision/recall/F1 and token accuracy
//! * [`cli`] — subcommands and binary model persistence

/// Scalar type used for all activations, parameters and gradients.
///
/// Defaults to `f64`; the `f32` feature switches the whole crate to single
/// precision (model files stay 64-bit on disk either way).
#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

pub(crate) mod hash;

pub mod cli;
pub mod corpus;
pub mod crf;
pub mod embeddings;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod train;
