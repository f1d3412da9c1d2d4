//! Word-vector tables and byte-level word encodings.
//!
//! Word vectors are loaded from text files (one token plus its components
//! per line) and stay frozen; only the shared unknown-word vector trains.
//! For the morphological path every word is the UTF-8 byte sequence of its
//! surface form wrapped in start/end marker bytes, projected byte-by-byte
//! through a learned 256-column table.

use crate::hash::Fnv1a;
use crate::nn::{ParamTensor, RngStream};
use crate::Real;
use std::collections::HashMap;
use std::io::BufRead;
use thiserror::Error;

/// Start-of-word marker byte. Never occurs inside UTF-8 encoded text that
/// passed corpus validation.
pub const BYTE_SOW: u8 = 0x01;
/// End-of-word marker byte.
pub const BYTE_EOW: u8 = 0x02;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line {line}: expected {expected} components, found {found}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse `{field}` as a number")]
    BadNumber { line: usize, field: String },
    #[error("line {line}: token contains reserved byte 0x01/0x02")]
    ReservedByte { line: usize },
    #[error("embedding file has no vectors")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether lookups fold case. Uncased tables (GloVe-style) lowercase the
/// query token; cased tables (Polyglot-style) match exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseMode {
    Cased,
    Uncased,
}

impl CaseMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseMode::Cased => "cased",
            CaseMode::Uncased => "uncased",
        }
    }
}

impl std::str::FromStr for CaseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cased" => Ok(CaseMode::Cased),
            "uncased" => Ok(CaseMode::Uncased),
            other => Err(format!("unknown case mode `{other}`")),
        }
    }
}

/// Result of a vocabulary lookup: a row index or the unknown sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Index(usize),
    Unknown,
}

/// Frozen word-vector matrix plus the one trainable unknown vector.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    case_mode: CaseMode,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<Real>, // V x dim, row-major; receives no gradients
    pub unknown_vector: ParamTensor,
}

impl EmbeddingTable {
    /// Loads a text-format table. Each non-empty line is a token followed by
    /// `dim` decimal components. The first line fixes the dimension unless
    /// `expected_dim` is given; on duplicate tokens the first occurrence wins.
    pub fn load_text<R: BufRead>(
        reader: R,
        case_mode: CaseMode,
        expected_dim: Option<usize>,
        rng: &mut RngStream,
    ) -> Result<Self, EmbeddingError> {
        let mut dim = expected_dim;
        let mut tokens = Vec::new();
        let mut index = HashMap::new();
        let mut vectors = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a first field");
            if token.bytes().any(|b| b == BYTE_SOW || b == BYTE_EOW) {
                return Err(EmbeddingError::ReservedByte { line: line_no });
            }
            let mut components = Vec::with_capacity(dim.unwrap_or(0));
            for field in fields {
                let v: f64 = field.parse().map_err(|_| EmbeddingError::BadNumber {
                    line: line_no,
                    field: field.to_string(),
                })?;
                components.push(v as Real);
            }
            match dim {
                None => dim = Some(components.len()),
                Some(d) if d != components.len() => {
                    return Err(EmbeddingError::DimMismatch {
                        line: line_no,
                        expected: d,
                        found: components.len(),
                    })
                }
                Some(_) => {}
            }
            if index.contains_key(token) {
                continue; // first occurrence wins
            }
            index.insert(token.to_string(), tokens.len());
            tokens.push(token.to_string());
            vectors.extend_from_slice(&components);
        }
        let dim = dim.filter(|d| *d > 0).ok_or(EmbeddingError::Empty)?;
        if tokens.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        Ok(EmbeddingTable {
            dim,
            case_mode,
            tokens,
            index,
            vectors,
            unknown_vector: ParamTensor::weight_vec(dim, rng),
        })
    }

    /// Builds a table directly from rows; used by synthetic corpora and tests.
    pub fn from_rows(
        rows: Vec<(String, Vec<Real>)>,
        case_mode: CaseMode,
        rng: &mut RngStream,
    ) -> Self {
        assert!(!rows.is_empty());
        let dim = rows[0].1.len();
        let mut tokens = Vec::new();
        let mut index = HashMap::new();
        let mut vectors = Vec::new();
        for (token, row) in rows {
            assert_eq!(row.len(), dim);
            if index.contains_key(&token) {
                continue;
            }
            index.insert(token.clone(), tokens.len());
            tokens.push(token);
            vectors.extend_from_slice(&row);
        }
        EmbeddingTable {
            dim,
            case_mode,
            tokens,
            index,
            vectors,
            unknown_vector: ParamTensor::weight_vec(dim, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn case_mode(&self) -> CaseMode {
        self.case_mode
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    /// Total lookup. Uncased tables fold the query to lowercase first;
    /// misses resolve to the trainable unknown vector.
    pub fn lookup(&self, token: &str) -> Lookup {
        let hit = match self.case_mode {
            CaseMode::Cased => self.index.get(token),
            CaseMode::Uncased => self.index.get(token.to_lowercase().as_str()),
        };
        match hit {
            Some(&i) => Lookup::Index(i),
            None => Lookup::Unknown,
        }
    }

    pub fn vector(&self, lookup: Lookup) -> &[Real] {
        match lookup {
            Lookup::Index(i) => &self.vectors[i * self.dim..(i + 1) * self.dim],
            Lookup::Unknown => &self.unknown_vector.values,
        }
    }

    /// Fingerprint of the vocabulary (tokens in order, dimension, case
    /// mode) used to detect mismatched embedding files at model load.
    pub fn vocab_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.dim as u64);
        h.write(self.case_mode.as_str().as_bytes());
        for token in &self.tokens {
            h.write(token.as_bytes());
            h.write(&[0xff]);
        }
        h.finish()
    }
}

/// Encodes a word as its UTF-8 bytes wrapped in start/end markers.
pub fn word_to_bytes(token: &str) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(token.len() + 2);
    bytes.push(BYTE_SOW);
    bytes.extend_from_slice(token.as_bytes());
    bytes.push(BYTE_EOW);
    bytes
}

/// Learned projection of each of the 256 byte values into `dim`-dimensional
/// space; stored with one contiguous row per byte value.
#[derive(Debug, Clone)]
pub struct ByteProjectionTable {
    pub param: ParamTensor,
    dim: usize,
}

impl ByteProjectionTable {
    pub fn init(dim: usize, rng: &mut RngStream) -> Self {
        // Fan view: one-of-256 input, dim-dimensional output.
        let param = ParamTensor::weight_with_fans(vec![256, dim], 256, dim, rng);
        ByteProjectionTable { param, dim }
    }

    pub fn from_param(param: ParamTensor) -> Self {
        assert_eq!(param.shape()[0], 256);
        let dim = param.shape()[1];
        ByteProjectionTable { param, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projection(&self, byte: u8) -> &[Real] {
        let b = byte as usize;
        &self.param.values[b * self.dim..(b + 1) * self.dim]
    }

    /// Column selection for a whole byte sequence.
    pub fn project_bytes(&self, seq: &[u8]) -> Vec<Vec<Real>> {
        seq.iter().map(|&b| self.projection(b).to_vec()).collect()
    }

    /// Accumulates a gradient into the row selected by `byte`.
    pub fn accumulate_grad(&mut self, byte: u8, grad: &[Real]) {
        let b = byte as usize;
        for (g, d) in self.param.grad[b * self.dim..(b + 1) * self.dim]
            .iter_mut()
            .zip(grad)
        {
            *g += d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn rng() -> RngStream {
        RngStream::from_seed(123)
    }

    #[test]
    fn loads_small_fixture() {
        let text = "the 0.1 0.2 0.3 0.4\ncat -1 2 -3 4\ndog 0 0 0 1\n";
        let table =
            EmbeddingTable::load_text(Cursor::new(text), CaseMode::Uncased, None, &mut rng())
                .unwrap();
        assert_eq!(table.vocab_size(), 3);
        assert_eq!(table.dim(), 4);
        assert_eq!(table.vector(table.lookup("cat")), &[-1.0, 2.0, -3.0, 4.0]);
    }

    #[test]
    fn first_occurrence_wins_on_duplicates() {
        let text = "a 1 1\na 2 2\n";
        let table =
            EmbeddingTable::load_text(Cursor::new(text), CaseMode::Cased, None, &mut rng())
                .unwrap();
        assert_eq!(table.vocab_size(), 1);
        assert_eq!(table.vector(table.lookup("a")), &[1.0, 1.0]);
    }

    #[test]
    fn dimension_mismatch_reports_line() {
        let text = "a 1 2\nb 1 2 3\n";
        let err = EmbeddingTable::load_text(Cursor::new(text), CaseMode::Cased, None, &mut rng())
            .unwrap_err();
        assert!(matches!(
            err,
            EmbeddingError::DimMismatch { line: 2, expected: 2, found: 3 }
        ));
    }

    #[test]
    fn expected_dim_is_enforced_from_first_line() {
        let text = "a 1 2 3\n";
        let err =
            EmbeddingTable::load_text(Cursor::new(text), CaseMode::Cased, Some(5), &mut rng())
                .unwrap_err();
        assert!(matches!(err, EmbeddingError::DimMismatch { line: 1, .. }));
    }

    #[test]
    fn non_numeric_component_is_an_error() {
        let text = "a 1 x\n";
        let err = EmbeddingTable::load_text(Cursor::new(text), CaseMode::Cased, None, &mut rng())
            .unwrap_err();
        assert!(matches!(err, EmbeddingError::BadNumber { line: 1, .. }));
    }

    #[test]
    fn uncased_lookup_folds_query() {
        let text = "the 1 2\n";
        let table =
            EmbeddingTable::load_text(Cursor::new(text), CaseMode::Uncased, None, &mut rng())
                .unwrap();
        assert_eq!(table.lookup("The"), table.lookup("the"));
        assert!(matches!(table.lookup("THE"), Lookup::Index(0)));
    }

    #[test]
    fn cased_lookup_misses_different_case() {
        let text = "amsterdam 1 2\n";
        let table =
            EmbeddingTable::load_text(Cursor::new(text), CaseMode::Cased, None, &mut rng())
                .unwrap();
        assert_eq!(table.lookup("Amsterdam"), Lookup::Unknown);
        assert!(matches!(table.lookup("amsterdam"), Lookup::Index(0)));
    }

    #[test]
    fn unknown_resolves_to_trainable_vector() {
        let text = "a 1 2\n";
        let table =
            EmbeddingTable::load_text(Cursor::new(text), CaseMode::Cased, None, &mut rng())
                .unwrap();
        assert_eq!(table.vector(Lookup::Unknown), table.unknown_vector.values);
        assert!(table.unknown_vector.trainable);
        // Initialized like a weight, not zeroed.
        assert!(table.unknown_vector.values.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn vocab_hash_tracks_contents() {
        let a = EmbeddingTable::load_text(Cursor::new("a 1\nb 2\n"), CaseMode::Cased, None, &mut rng()).unwrap();
        let b = EmbeddingTable::load_text(Cursor::new("a 1\nb 2\n"), CaseMode::Cased, None, &mut rng()).unwrap();
        let c = EmbeddingTable::load_text(Cursor::new("a 1\nc 2\n"), CaseMode::Cased, None, &mut rng()).unwrap();
        let d = EmbeddingTable::load_text(Cursor::new("a 1\nb 2\n"), CaseMode::Uncased, None, &mut rng()).unwrap();
        assert_eq!(a.vocab_hash(), b.vocab_hash());
        assert_ne!(a.vocab_hash(), c.vocab_hash());
        assert_ne!(a.vocab_hash(), d.vocab_hash());
    }

    #[test]
    fn word_to_bytes_ascii() {
        assert_eq!(word_to_bytes("cat"), vec![0x01, 0x63, 0x61, 0x74, 0x02]);
    }

    #[test]
    fn word_to_bytes_multibyte_utf8() {
        assert_eq!(word_to_bytes("\u{e9}"), vec![0x01, 0xc3, 0xa9, 0x02]);
    }

    #[test]
    fn word_to_bytes_empty_word() {
        assert_eq!(word_to_bytes(""), vec![0x01, 0x02]);
    }

    #[test]
    fn projection_selects_rows() {
        let proj = ByteProjectionTable::init(8, &mut rng());
        let seq = [BYTE_SOW, BYTE_EOW];
        let out = proj.project_bytes(&seq);
        assert_eq!(out[0], proj.projection(0x01));
        assert_eq!(out[1], proj.projection(0x02));
    }

    #[test]
    fn identity_projection_is_one_hot() {
        let mut param = ParamTensor::zeros(vec![256, 256]);
        for k in 0..256 {
            param.values[k * 256 + k] = 1.0;
        }
        let proj = ByteProjectionTable::from_param(param);
        let v = proj.projection(0x41);
        assert_eq!(v[65], 1.0);
        assert_eq!(v.iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn repeated_byte_accumulates_gradient_twice() {
        let mut proj = ByteProjectionTable::init(4, &mut rng());
        let g = vec![1.0, 2.0, 3.0, 4.0];
        proj.accumulate_grad(0x61, &g);
        proj.accumulate_grad(0x61, &g);
        let row = &proj.param.grad[0x61 * 4..0x61 * 4 + 4];
        assert_eq!(row, &[2.0, 4.0, 6.0, 8.0]);
    }
}
