//! Word-embedding matrices in word2vec text format.
//!
//! Every vector is scaled to unit length when it enters an
//! [`EmbeddingMatrix`], so a dot product between two stored vectors is their
//! cosine and a projection onto a unit direction is comparable across words.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg;

/// Rows whose norm falls below this are rejected at load.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CasePolicy {
    #[default]
    Lowercase,
    Preserve,
}

impl CasePolicy {
    pub fn apply<'a>(&self, token: &'a str) -> std::borrow::Cow<'a, str> {
        match self {
            CasePolicy::Lowercase if token.chars().any(char::is_uppercase) => token.to_lowercase().into(),
            _ => token.into(),
        }
    }
}

/// A borrowed view of one stored vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordVector<'a> {
    pub word: &'a str,
    pub vec: &'a [f64],
}

/// A row that was dropped while building a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRow {
    pub line: usize,
    pub token: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub limit: Option<usize>,
    pub case_policy: CasePolicy,
}

#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    dim: usize,
    case_policy: CasePolicy,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    skipped: Vec<SkippedRow>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from `(token, vector)` rows, normalizing each vector.
    ///
    /// Zero-norm rows and case-folded duplicates are skipped and recorded.
    pub fn from_rows<I, S>(rows: I, case_policy: CasePolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut builder = Builder::new(case_policy, None);
        for (i, (token, vec)) in rows.into_iter().enumerate() {
            builder.push(i + 1, token.as_ref(), vec)?;
        }
        builder.finish(0)
    }

    /// Reads word2vec text format: an optional `vocab_count dim` header, then
    /// one `token v1 .. vdim` row per line.
    pub fn load(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, opts)
    }

    pub fn parse(text: &str, opts: &LoadOptions) -> Result<Self> {
        let mut builder = Builder::new(opts.case_policy, None);
        let mut header: Option<(usize, usize)> = None;
        let mut rows_read = 0usize;
        let mut last_line = 0;

        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            last_line = lineno;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if idx == 0 && fields.len() == 2 {
                if let (Ok(count), Ok(dim)) = (fields[0].parse(), fields[1].parse()) {
                    if dim == 0 {
                        return Err(Error::Format {
                            line: 1,
                            message: "header declares dimension 0".into(),
                        });
                    }
                    header = Some((count, dim));
                    builder.dim = Some(dim);
                    continue;
                }
            }
            if opts.limit.is_some_and(|limit| rows_read >= limit) {
                break;
            }
            rows_read += 1;

            let token = fields[0];
            let mut vec = Vec::with_capacity(fields.len() - 1);
            for (col, raw) in fields[1..].iter().enumerate() {
                let v: f64 = raw.parse().map_err(|_| Error::Format {
                    line: lineno,
                    message: format!("field {} of {token:?} is not a number: {raw:?}", col + 2),
                })?;
                if !v.is_finite() {
                    return Err(Error::Format {
                        line: lineno,
                        message: format!("non-finite value in {token:?}"),
                    });
                }
                vec.push(v);
            }
            builder.push(lineno, token, vec)?;
        }

        if let Some((count, _)) = header {
            if opts.limit.is_none() && count != rows_read {
                warn!("header declares {count} rows but {rows_read} were read");
            }
        }
        builder.finish(last_line)
    }

    /// Writes word2vec text format; the header is always present.
    pub fn to_word2vec_text(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 20);
        let _ = writeln!(out, "{} {}", self.len(), self.dim);
        for (word, vec) in self.iter() {
            out.push_str(word);
            for v in vec {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_word2vec_text()).map_err(|e| Error::io(path, e))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn case_policy(&self) -> CasePolicy {
        self.case_policy
    }

    pub fn skipped_rows(&self) -> &[SkippedRow] {
        &self.skipped
    }

    /// Applies the case policy, then looks the token up. Absent tokens are
    /// not an error.
    pub fn lookup(&self, token: &str) -> Option<WordVector<'_>> {
        let key = self.case_policy.apply(token);
        self.index.get(key.as_ref()).map(|&i| self.row(i))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.lookup(token).is_some()
    }

    pub(crate) fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(self.case_policy.apply(token).as_ref()).copied()
    }

    pub fn row(&self, i: usize) -> WordVector<'_> {
        WordVector {
            word: &self.words[i],
            vec: &self.data[i * self.dim..(i + 1) * self.dim],
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> + '_ {
        self.words
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(w, v)| (w.as_str(), v))
    }

    /// A copy with selected rows replaced. Replacement vectors are stored as
    /// given; callers are responsible for unit length.
    pub(crate) fn with_replaced_rows(&self, rows: impl IntoIterator<Item = (usize, Vec<f64>)>) -> Self {
        let mut out = self.clone();
        out.skipped.clear();
        for (i, vec) in rows {
            debug_assert_eq!(vec.len(), self.dim);
            out.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(&vec);
        }
        out
    }

    /// SHA-256 over tokens and the exact bit patterns of every coordinate.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for (word, vec) in self.iter() {
            h.update(word.as_bytes());
            h.update([0u8]);
            for v in vec {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Cosine of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(linalg::dot(a, b).clamp(-1.0, 1.0))
}

struct Builder {
    case_policy: CasePolicy,
    dim: Option<usize>,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    skipped: Vec<SkippedRow>,
}

impl Builder {
    fn new(case_policy: CasePolicy, dim: Option<usize>) -> Self {
        Builder {
            case_policy,
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            skipped: Vec::new(),
        }
    }

    fn push(&mut self, line: usize, token: &str, mut vec: Vec<f64>) -> Result<()> {
        match self.dim {
            Some(d) if d != vec.len() => {
                return Err(Error::Format {
                    line,
                    message: format!("{token:?} has {} components, expected {d}", vec.len()),
                })
            }
            None if vec.is_empty() => {
                return Err(Error::Format {
                    line,
                    message: format!("{token:?} has no vector components"),
                })
            }
            None => self.dim = Some(vec.len()),
            _ => {}
        }

        let key = self.case_policy.apply(token).into_owned();
        if self.index.contains_key(&key) {
            warn!("line {line}: duplicate token {key:?} ignored");
            self.skipped.push(SkippedRow {
                line,
                token: key,
                reason: "duplicate".into(),
            });
            return Ok(());
        }
        let norm = linalg::norm(&vec);
        if norm < ZERO_NORM {
            warn!("line {line}: zero-norm vector for {key:?} ignored");
            self.skipped.push(SkippedRow {
                line,
                token: key,
                reason: "zero norm".into(),
            });
            return Ok(());
        }
        // Rows already unit length to rounding are kept bit-for-bit so that
        // save/load round trips exactly.
        if (norm - 1.0).abs() > 4.0 * f64::EPSILON {
            vec.iter_mut().for_each(|x| *x /= norm);
        }
        self.index.insert(key.clone(), self.words.len());
        self.words.push(key);
        self.data.extend_from_slice(&vec);
        Ok(())
    }

    fn finish(self, last_line: usize) -> Result<EmbeddingMatrix> {
        let dim = match self.dim {
            Some(d) if !self.words.is_empty() => d,
            _ => {
                return Err(Error::Format {
                    line: last_line,
                    message: "no usable embedding rows".into(),
                })
            }
        };
        Ok(EmbeddingMatrix {
            dim,
            case_policy: self.case_policy,
            words: self.words,
            index: self.index,
            data: self.data,
            skipped: self.skipped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::parse(text, &LoadOptions::default())
    }

    #[test]
    fn header_and_unit_rows() {
        let m = parse("2 3\nhe 1 0 0\nshe 0 1 0\n").unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.len(), 2);
        assert_eq!(m.lookup("he").unwrap().vec, &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn rows_are_normalized() {
        let m = parse("king 3 4 0\n").unwrap();
        let v = m.lookup("king").unwrap().vec;
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15 && v[2] == 0.0);
    }

    #[test]
    fn non_numeric_field_names_line() {
        let err = parse("2 3\nhe 1 0 0\nbad 1 x 0\n").unwrap_err();
        match err {
            Error::Format { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("bad"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_dimension_must_match() {
        assert!(matches!(
            parse("1 4\nhe 1 0 0\n").unwrap_err(),
            Error::Format { line: 2, .. }
        ));
    }

    #[test]
    fn inconsistent_rows_rejected() {
        assert!(matches!(
            parse("a 1 0\nb 1 0 0\n").unwrap_err(),
            Error::Format { line: 2, .. }
        ));
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(parse("").unwrap_err(), Error::Format { .. }));
        assert!(matches!(parse("0 3\n").unwrap_err(), Error::Format { .. }));
    }

    #[test]
    fn zero_rows_skipped_with_record() {
        let m = parse("a 0 0\nb 0 2\n").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.skipped_rows()[0].token, "a");
        assert_eq!(m.skipped_rows()[0].line, 1);
    }

    #[test]
    fn case_folding_first_wins() {
        let m = parse("Lawyer 1 0\nlawyer 0 1\n").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.lookup("LAWYER").unwrap().vec, &[1.0, 0.0]);
        assert_eq!(m.skipped_rows()[0].reason, "duplicate");

        let opts = LoadOptions {
            case_policy: CasePolicy::Preserve,
            ..Default::default()
        };
        let m = EmbeddingMatrix::parse("Lawyer 1 0\nlawyer 0 1\n", &opts).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.lookup("LAWYER").is_none());
    }

    #[test]
    fn lookup_absent() {
        let m = parse("lawyer 1 0\n").unwrap();
        assert!(m.lookup("zzzq").is_none());
        assert!(m.lookup("Lawyer").is_some());
    }

    #[test]
    fn limit_and_crlf() {
        let opts = LoadOptions {
            limit: Some(2),
            ..Default::default()
        };
        let m = EmbeddingMatrix::parse("3 2\r\na 1 0\r\nb 0 1\r\nc 1 1\r\n", &opts).unwrap();
        assert_eq!(m.words(), &["a", "b"]);
    }

    #[test]
    fn cosine_cases() {
        let v = [0.6, 0.8];
        let w = [-0.8, 0.6];
        assert_eq!(cosine(&v, &v).unwrap(), 1.0);
        assert_eq!(cosine(&v, &w).unwrap(), 0.0);
        assert_eq!(cosine(&v, &[-0.6, -0.8]).unwrap(), -1.0);
        assert!(matches!(
            cosine(&v, &[1.0]).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let m = parse("x 0.1 0.2 0.3\ny -1 2 -3e-5\n").unwrap();
        let back = parse(&m.to_word2vec_text()).unwrap();
        assert_eq!(m.checksum(), back.checksum());
    }
}
