//! Linear-chain CRF over per-token label scores.
//!
//! A labeling `y` of an `n`-token sentence is scored as
//! `sum_i s[i][y_i] + sum_i A[y_i][y_{i+1}]` — emissions plus learned
//! transitions, with no extra start/stop terms. The partition function and
//! marginals come from the forward(-backward) recursions in log space;
//! decoding is Viterbi. A per-position softmax decoder covers the CRF-less
//! configuration.

use crate::nn::ParamTensor;
use crate::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("label sequence length {found} does not match {expected} score rows")]
    LengthMismatch { expected: usize, found: usize },
    #[error("label {label} at position {pos} out of range (L = {num_labels})")]
    LabelOutOfRange {
        pos: usize,
        label: usize,
        num_labels: usize,
    },
    #[error("transition matrix is {found}x{found} but scores have {expected} labels")]
    LabelCountMismatch { expected: usize, found: usize },
}

/// Unnormalized per-token label scores, `n x L` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    num_labels: usize,
    data: Vec<Real>,
}

impl ScoreMatrix {
    pub fn zeros(n: usize, num_labels: usize) -> Self {
        assert!(n >= 1 && num_labels >= 1, "score matrix must be non-empty");
        ScoreMatrix {
            n,
            num_labels,
            data: vec![0.0; n * num_labels],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Real>>) -> Self {
        assert!(!rows.is_empty(), "score matrix must have at least one row");
        let num_labels = rows[0].len();
        assert!(num_labels >= 1);
        let mut data = Vec::with_capacity(rows.len() * num_labels);
        for row in &rows {
            assert_eq!(row.len(), num_labels, "ragged score rows");
            data.extend_from_slice(row);
        }
        ScoreMatrix {
            n: rows.len(),
            num_labels,
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn row(&self, i: usize) -> &[Real] {
        &self.data[i * self.num_labels..(i + 1) * self.num_labels]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Real] {
        &mut self.data[i * self.num_labels..(i + 1) * self.num_labels]
    }

    pub fn at(&self, i: usize, j: usize) -> Real {
        self.data[i * self.num_labels + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Real) {
        self.data[i * self.num_labels + j] = v;
    }

    pub fn scale(&mut self, factor: Real) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

/// Learned `L x L` label transition scores; entry `(i, j)` scores moving
/// from label `i` to label `j`.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub param: ParamTensor,
    num_labels: usize,
}

impl TransitionMatrix {
    pub fn init(num_labels: usize, rng: &mut crate::nn::RngStream) -> Self {
        TransitionMatrix {
            param: ParamTensor::weight(num_labels, num_labels, rng),
            num_labels,
        }
    }

    pub fn from_param(param: ParamTensor) -> Self {
        assert_eq!(param.shape().len(), 2);
        assert_eq!(param.shape()[0], param.shape()[1]);
        let num_labels = param.shape()[0];
        TransitionMatrix { param, num_labels }
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn at(&self, from: usize, to: usize) -> Real {
        self.param.values[from * self.num_labels + to]
    }
}

/// A sequence of label indices, one per token.
pub type LabelSeq = Vec<usize>;

fn logsumexp(xs: &[Real]) -> Real {
    let m = xs.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
    if m == Real::NEG_INFINITY {
        return Real::NEG_INFINITY;
    }
    let sum: Real = xs.iter().map(|x| (x - m).exp()).sum();
    m + sum.ln()
}

fn check_labels(s: &ScoreMatrix, a: &TransitionMatrix, y: &[usize]) -> Result<(), CrfError> {
    if a.num_labels() != s.num_labels() {
        return Err(CrfError::LabelCountMismatch {
            expected: s.num_labels(),
            found: a.num_labels(),
        });
    }
    if y.len() != s.len() {
        return Err(CrfError::LengthMismatch {
            expected: s.len(),
            found: y.len(),
        });
    }
    for (pos, &label) in y.iter().enumerate() {
        if label >= s.num_labels() {
            return Err(CrfError::LabelOutOfRange {
                pos,
                label,
                num_labels: s.num_labels(),
            });
        }
    }
    Ok(())
}

/// Total score of one labeling: emissions plus transitions.
pub fn path_score(s: &ScoreMatrix, a: &TransitionMatrix, y: &[usize]) -> Result<Real, CrfError> {
    check_labels(s, a, y)?;
    let mut total = 0.0;
    for (i, &label) in y.iter().enumerate() {
        total += s.at(i, label);
    }
    for i in 0..y.len().saturating_sub(1) {
        total += a.at(y[i], y[i + 1]);
    }
    Ok(total)
}

/// Forward recursion in log space: `alpha[t][j]` is the log-sum of scores of
/// all prefixes ending at position `t` with label `j`.
fn forward_alphas(s: &ScoreMatrix, a: &TransitionMatrix) -> Vec<Vec<Real>> {
    let (n, l) = (s.len(), s.num_labels());
    let mut alpha = vec![vec![0.0; l]; n];
    alpha[0].copy_from_slice(s.row(0));
    let mut terms = vec![0.0; l];
    for t in 1..n {
        for j in 0..l {
            for (k, term) in terms.iter_mut().enumerate() {
                *term = alpha[t - 1][k] + a.at(k, j);
            }
            alpha[t][j] = logsumexp(&terms) + s.at(t, j);
        }
    }
    alpha
}

fn backward_betas(s: &ScoreMatrix, a: &TransitionMatrix) -> Vec<Vec<Real>> {
    let (n, l) = (s.len(), s.num_labels());
    let mut beta = vec![vec![0.0; l]; n];
    let mut terms = vec![0.0; l];
    for t in (0..n - 1).rev() {
        for j in 0..l {
            for (k, term) in terms.iter_mut().enumerate() {
                *term = a.at(j, k) + s.at(t + 1, k) + beta[t + 1][k];
            }
            beta[t][j] = logsumexp(&terms);
        }
    }
    beta
}

/// Log of the partition function: log-sum-exp of the total scores of all
/// `L^n` labelings, computed by the forward recursion.
pub fn log_partition(s: &ScoreMatrix, a: &TransitionMatrix) -> Real {
    let alpha = forward_alphas(s, a);
    logsumexp(&alpha[s.len() - 1])
}

/// Negative log-likelihood of the gold labeling and its exact gradients:
/// `ds` holds unary marginals minus gold indicators, `da` (row-major `L x L`)
/// pairwise marginals minus gold transition counts.
pub fn crf_nll(
    s: &ScoreMatrix,
    a: &TransitionMatrix,
    y: &[usize],
) -> Result<(Real, ScoreMatrix, Vec<Real>), CrfError> {
    check_labels(s, a, y)?;
    let (n, l) = (s.len(), s.num_labels());
    let alpha = forward_alphas(s, a);
    let beta = backward_betas(s, a);
    let log_z = logsumexp(&alpha[n - 1]);
    let gold = path_score(s, a, y)?;
    let loss = log_z - gold;

    let mut ds = ScoreMatrix::zeros(n, l);
    for t in 0..n {
        for j in 0..l {
            let marginal = (alpha[t][j] + beta[t][j] - log_z).exp();
            ds.set(t, j, marginal);
        }
        let row = ds.row_mut(t);
        row[y[t]] -= 1.0;
    }

    let mut da = vec![0.0; l * l];
    for t in 0..n - 1 {
        for i in 0..l {
            for j in 0..l {
                let p =
                    (alpha[t][i] + a.at(i, j) + s.at(t + 1, j) + beta[t + 1][j] - log_z).exp();
                da[i * l + j] += p;
            }
        }
        da[y[t] * l + y[t + 1]] -= 1.0;
    }
    Ok((loss, ds, da))
}

/// Highest-scoring labeling and its score. Ties break toward the smaller
/// label index at every step.
pub fn viterbi(s: &ScoreMatrix, a: &TransitionMatrix) -> (LabelSeq, Real) {
    viterbi_impl(s, a, None)
}

/// Viterbi restricted to transitions allowed by `mask` (`mask[i*L+j]` true
/// when label `j` may follow label `i`); `start`/`end` restrict boundary
/// labels. Used by the optional scheme-constrained decoder.
pub fn viterbi_masked(
    s: &ScoreMatrix,
    a: &TransitionMatrix,
    mask: &TransitionMask,
) -> (LabelSeq, Real) {
    viterbi_impl(s, a, Some(mask))
}

/// Allowed transitions and boundary labels for constrained decoding.
#[derive(Debug, Clone)]
pub struct TransitionMask {
    pub num_labels: usize,
    pub pair: Vec<bool>,
    pub start: Vec<bool>,
    pub end: Vec<bool>,
}

fn viterbi_impl(
    s: &ScoreMatrix,
    a: &TransitionMatrix,
    mask: Option<&TransitionMask>,
) -> (LabelSeq, Real) {
    let (n, l) = (s.len(), s.num_labels());
    let allowed_pair = |i: usize, j: usize| mask.map_or(true, |m| m.pair[i * l + j]);
    let allowed_start = |j: usize| mask.map_or(true, |m| m.start[j]);
    let allowed_end = |j: usize| mask.map_or(true, |m| m.end[j]);

    let mut delta = vec![vec![Real::NEG_INFINITY; l]; n];
    let mut back = vec![vec![0usize; l]; n];
    for j in 0..l {
        if allowed_start(j) {
            delta[0][j] = s.at(0, j);
        }
    }
    for t in 1..n {
        for j in 0..l {
            let mut best = Real::NEG_INFINITY;
            let mut best_k = 0;
            for k in 0..l {
                if !allowed_pair(k, j) {
                    continue;
                }
                let cand = delta[t - 1][k] + a.at(k, j);
                if cand > best {
                    best = cand;
                    best_k = k;
                }
            }
            delta[t][j] = best + s.at(t, j);
            back[t][j] = best_k;
        }
    }

    let mut best = Real::NEG_INFINITY;
    let mut best_j = 0;
    for j in 0..l {
        if allowed_end(j) && delta[n - 1][j] > best {
            best = delta[n - 1][j];
            best_j = j;
        }
    }
    let mut y = vec![0usize; n];
    y[n - 1] = best_j;
    for t in (1..n).rev() {
        y[t - 1] = back[t][y[t]];
    }
    let score = path_score(s, a, &y).expect("decoded path is well-formed");
    (y, score)
}

/// Per-position softmax decoding for models without a CRF layer. Returns the
/// argmax labeling and the full probability rows.
pub fn softmax_decode(s: &ScoreMatrix) -> (LabelSeq, Vec<Vec<Real>>) {
    let (n, l) = (s.len(), s.num_labels());
    let mut labels = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for t in 0..n {
        let row = s.row(t);
        let m = row.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
        let exps: Vec<Real> = row.iter().map(|v| (v - m).exp()).collect();
        let z: Real = exps.iter().sum();
        let p: Vec<Real> = exps.iter().map(|e| e / z).collect();
        let mut arg = 0;
        for j in 1..l {
            if row[j] > row[arg] {
                arg = j;
            }
        }
        labels.push(arg);
        probs.push(p);
    }
    (labels, probs)
}

/// Sentence loss for the no-CRF objective: the sum over tokens of softmax
/// cross-entropy, with its gradient on the scores.
pub fn softmax_nll(s: &ScoreMatrix, y: &[usize]) -> Result<(Real, ScoreMatrix), CrfError> {
    if y.len() != s.len() {
        return Err(CrfError::LengthMismatch {
            expected: s.len(),
            found: y.len(),
        });
    }
    let (n, l) = (s.len(), s.num_labels());
    let mut loss = 0.0;
    let mut ds = ScoreMatrix::zeros(n, l);
    for t in 0..n {
        let label = y[t];
        if label >= l {
            return Err(CrfError::LabelOutOfRange {
                pos: t,
                label,
                num_labels: l,
            });
        }
        let row = s.row(t);
        loss += logsumexp(row) - row[label];
        let m = row.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
        let exps: Vec<Real> = row.iter().map(|v| (v - m).exp()).collect();
        let z: Real = exps.iter().sum();
        for j in 0..l {
            ds.set(t, j, exps[j] / z);
        }
        let row = ds.row_mut(t);
        row[label] -= 1.0;
    }
    Ok((loss, ds))
}
