//! CoNLL column corpora, label vocabularies, tagging schemes and dev splits.
//!
//! A corpus file is UTF-8 text with one token per line, columns separated by
//! whitespace and sentences separated by blank lines. `-DOCSTART-` lines are
//! dropped. The tagging scheme of a file is never guessed: callers state it,
//! because a silently wrong guess corrupts chunk boundaries.

use crate::embeddings::{BYTE_EOW, BYTE_SOW};
use crate::nn::RngStream;
use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: expected at least {needed} columns, found {found}")]
    MissingColumns {
        line: usize,
        needed: usize,
        found: usize,
    },
    #[error("line {line}: token contains reserved byte 0x01/0x02")]
    ReservedByte { line: usize },
    #[error("position {pos}: malformed label `{label}` for scheme {scheme}")]
    MalformedLabel {
        pos: usize,
        label: String,
        scheme: SchemeKind,
    },
    #[error("cannot convert between {from} and {to}")]
    UnsupportedConversion { from: SchemeKind, to: SchemeKind },
    #[error("need at least 2 sentences to split, found {0}")]
    SplitTooSmall(usize),
    #[error("split fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Chunk-encoding scheme of a label column. `Raw` means plain per-token
/// classes with no chunk structure (POS tags).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Iob1,
    Iob2,
    Iobes,
    Raw,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SchemeKind::Iob1 => "iob1",
            SchemeKind::Iob2 => "iob2",
            SchemeKind::Iobes => "iobes",
            SchemeKind::Raw => "raw",
        };
        f.write_str(name)
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iob1" => Ok(SchemeKind::Iob1),
            "iob2" => Ok(SchemeKind::Iob2),
            "iobes" => Ok(SchemeKind::Iobes),
            "raw" => Ok(SchemeKind::Raw),
            other => Err(format!(
                "unknown scheme `{other}` (expected iob1, iob2, iobes or raw)"
            )),
        }
    }
}

/// One token: its surface form and, when the corpus is labeled, the index of
/// its gold label in the corpus vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub gold_label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    /// Gold label indices; panics if any token is unlabeled.
    pub fn gold_indices(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .map(|t| t.gold_label.expect("token has no gold label"))
            .collect()
    }
}

/// Bidirectional label-string <-> index map in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelVocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelVocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I: IntoIterator<Item = S>, S: AsRef<str>>(names: I) -> Self {
        let mut v = Self::new();
        for n in names {
            v.intern(n.as_ref());
        }
        v
    }

    pub fn intern(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.names.len();
        self.names.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

fn check_surface(surface: &str, line: usize) -> Result<(), CorpusError> {
    if surface
        .bytes()
        .any(|b| b == BYTE_SOW || b == BYTE_EOW)
    {
        return Err(CorpusError::ReservedByte { line });
    }
    Ok(())
}

/// Parses a labeled CoNLL stream, interning labels into `vocab` in
/// first-seen order.
pub fn parse_conll_with_vocab<R: BufRead>(
    reader: R,
    token_column: usize,
    label_column: usize,
    vocab: &mut LabelVocab,
) -> Result<Vec<Sentence>, CorpusError> {
    parse_columns(reader, token_column, Some((label_column, vocab)))
}

/// Parses a labeled CoNLL stream into sentences plus a fresh label vocabulary.
pub fn parse_conll<R: BufRead>(
    reader: R,
    token_column: usize,
    label_column: usize,
) -> Result<(Vec<Sentence>, LabelVocab), CorpusError> {
    let mut vocab = LabelVocab::new();
    let sentences = parse_conll_with_vocab(reader, token_column, label_column, &mut vocab)?;
    Ok((sentences, vocab))
}

/// Parses token surfaces only (input to tagging).
pub fn parse_unlabeled<R: BufRead>(
    reader: R,
    token_column: usize,
) -> Result<Vec<Sentence>, CorpusError> {
    parse_columns(reader, token_column, None)
}

fn parse_columns<R: BufRead>(
    reader: R,
    token_column: usize,
    mut label: Option<(usize, &mut LabelVocab)>,
) -> Result<Vec<Sentence>, CorpusError> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                sentences.push(Sentence {
                    tokens: std::mem::take(&mut tokens),
                });
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols[0] == "-DOCSTART-" {
            continue;
        }
        let needed = match &label {
            Some((lc, _)) => token_column.max(*lc) + 1,
            None => token_column + 1,
        };
        if cols.len() < needed {
            return Err(CorpusError::MissingColumns {
                line: line_no,
                needed,
                found: cols.len(),
            });
        }
        let surface = cols[token_column];
        check_surface(surface, line_no)?;
        let gold_label = match &mut label {
            Some((lc, vocab)) => Some(vocab.intern(cols[*lc])),
            None => None,
        };
        tokens.push(Token {
            surface: surface.to_string(),
            gold_label,
        });
    }
    if !tokens.is_empty() {
        sentences.push(Sentence { tokens });
    }
    Ok(sentences)
}

/// Renders sentences back to two-column CoNLL text (`surface label`), or a
/// single column when unlabeled.
pub fn to_conll_string(sentences: &[Sentence], vocab: &LabelVocab) -> String {
    let mut out = String::new();
    for (i, sentence) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for token in &sentence.tokens {
            out.push_str(&token.surface);
            if let Some(label) = token.gold_label {
                out.push(' ');
                out.push_str(vocab.name(label));
            }
            out.push('\n');
        }
    }
    out
}

/// Maps one sentence's gold indices back to label strings.
pub fn sentence_labels(sentence: &Sentence, vocab: &LabelVocab) -> Vec<String> {
    sentence
        .gold_indices()
        .iter()
        .map(|&i| vocab.name(i).to_string())
        .collect()
}

// ---------------------------------------------------------------------------
// Chunk segmentation shared by scheme conversion and entity extraction.
// ---------------------------------------------------------------------------

enum ParsedLabel<'a> {
    Outside,
    Chunk(char, &'a str),
}

fn parse_label<'a>(label: &'a str, scheme: SchemeKind) -> Option<ParsedLabel<'a>> {
    if label == "O" {
        return Some(ParsedLabel::Outside);
    }
    let (prefix, ty) = label.split_once('-')?;
    if ty.is_empty() {
        return None;
    }
    let mut chars = prefix.chars();
    let p = chars.next()?;
    if chars.next().is_some() {
        return None;
    }
    let allowed: &[char] = match scheme {
        SchemeKind::Iob1 | SchemeKind::Iob2 => &['B', 'I'],
        SchemeKind::Iobes => &['B', 'I', 'E', 'S'],
        SchemeKind::Raw => return None,
    };
    if allowed.contains(&p) {
        Some(ParsedLabel::Chunk(p, ty))
    } else {
        None
    }
}

/// A maximal chunk: type plus inclusive token range.
pub(crate) type RawSpan = (String, usize, usize);

/// Segments a label sequence into chunks.
///
/// Structural damage is tolerated the way the CoNLL evaluation script
/// tolerates it: an orphan `I-X`/`E-X` starts a fresh chunk. In strict mode
/// a syntactically malformed label is an error; otherwise it reads as `O`.
/// Under `Raw` every token is its own chunk.
pub(crate) fn segment_chunks(
    labels: &[&str],
    scheme: SchemeKind,
    strict: bool,
) -> Result<Vec<RawSpan>, CorpusError> {
    if scheme == SchemeKind::Raw {
        return Ok(labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.to_string(), i, i))
            .collect());
    }
    let mut spans: Vec<RawSpan> = Vec::new();
    let mut open: Option<(String, usize)> = None;
    for (i, &label) in labels.iter().enumerate() {
        let parsed = match parse_label(label, scheme) {
            Some(p) => p,
            None if strict => {
                return Err(CorpusError::MalformedLabel {
                    pos: i,
                    label: label.to_string(),
                    scheme,
                })
            }
            None => ParsedLabel::Outside,
        };
        match parsed {
            ParsedLabel::Outside => {
                if let Some((ty, start)) = open.take() {
                    spans.push((ty, start, i - 1));
                }
            }
            ParsedLabel::Chunk(prefix, ty) => match prefix {
                'B' => {
                    if let Some((oty, start)) = open.take() {
                        spans.push((oty, start, i - 1));
                    }
                    open = Some((ty.to_string(), i));
                }
                'S' => {
                    if let Some((oty, start)) = open.take() {
                        spans.push((oty, start, i - 1));
                    }
                    spans.push((ty.to_string(), i, i));
                }
                'I' => match &open {
                    Some((oty, _)) if oty == ty => {}
                    _ => {
                        if let Some((oty, start)) = open.take() {
                            spans.push((oty, start, i - 1));
                        }
                        open = Some((ty.to_string(), i));
                    }
                },
                'E' => match open.take() {
                    Some((oty, start)) if oty == ty => {
                        spans.push((oty, start, i));
                    }
                    other => {
                        if let Some((oty, start)) = other {
                            spans.push((oty, start, i - 1));
                        }
                        spans.push((ty.to_string(), i, i));
                    }
                },
                _ => unreachable!("parse_label filters prefixes"),
            },
        }
    }
    if let Some((ty, start)) = open {
        spans.push((ty, start, labels.len() - 1));
    }
    Ok(spans)
}

fn render_spans(spans: &[RawSpan], len: usize, scheme: SchemeKind) -> Vec<String> {
    let mut out = vec!["O".to_string(); len];
    match scheme {
        SchemeKind::Iobes => {
            for (ty, start, end) in spans {
                if start == end {
                    out[*start] = format!("S-{ty}");
                } else {
                    out[*start] = format!("B-{ty}");
                    for slot in out.iter_mut().take(*end).skip(start + 1) {
                        *slot = format!("I-{ty}");
                    }
                    out[*end] = format!("E-{ty}");
                }
            }
        }
        SchemeKind::Iob2 => {
            for (ty, start, end) in spans {
                out[*start] = format!("B-{ty}");
                for slot in out.iter_mut().take(end + 1).skip(start + 1) {
                    *slot = format!("I-{ty}");
                }
            }
        }
        SchemeKind::Iob1 => {
            // B- only separates adjacent chunks of the same type.
            let mut prev: Option<&RawSpan> = None;
            for span in spans {
                let (ty, start, end) = span;
                let adjacent_same = prev
                    .map(|(pty, _, pend)| pty == ty && pend + 1 == *start)
                    .unwrap_or(false);
                out[*start] = if adjacent_same {
                    format!("B-{ty}")
                } else {
                    format!("I-{ty}")
                };
                for slot in out.iter_mut().take(end + 1).skip(start + 1) {
                    *slot = format!("I-{ty}");
                }
                prev = Some(span);
            }
        }
        SchemeKind::Raw => unreachable!("raw labels are never rendered from spans"),
    }
    out
}

/// Re-encodes a label sequence from one chunk scheme into another. Chunk
/// spans and types are preserved exactly; the output is canonical for `to`.
pub fn convert_scheme(
    labels: &[String],
    from: SchemeKind,
    to: SchemeKind,
) -> Result<Vec<String>, CorpusError> {
    if from == SchemeKind::Raw || to == SchemeKind::Raw {
        if from == to {
            return Ok(labels.to_vec());
        }
        return Err(CorpusError::UnsupportedConversion { from, to });
    }
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let spans = segment_chunks(&refs, from, true)?;
    Ok(render_spans(&spans, labels.len(), to))
}

/// Deterministically splits sentences into `(train, dev)`; the dev subset has
/// `round(fraction * N)` members (half-up) chosen by the seeded shuffle, and
/// both halves keep their original relative order.
pub fn dev_split(
    sentences: Vec<Sentence>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Sentence>, Vec<Sentence>), CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::BadFraction(fraction));
    }
    let n = sentences.len();
    if n < 2 {
        return Err(CorpusError::SplitTooSmall(n));
    }
    let dev_size = (fraction * n as f64 + 0.5).floor() as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::from_seed(seed);
    rng.shuffle(&mut indices);
    let mut in_dev = vec![false; n];
    for &i in indices.iter().take(dev_size) {
        in_dev[i] = true;
    }
    let mut train = Vec::with_capacity(n - dev_size);
    let mut dev = Vec::with_capacity(dev_size);
    for (i, sentence) in sentences.into_iter().enumerate() {
        if in_dev[i] {
            dev.push(sentence);
        } else {
            train.push(sentence);
        }
    }
    Ok((train, dev))
}
