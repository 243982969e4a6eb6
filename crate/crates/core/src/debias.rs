//! Hard debiasing: neutralize words that should carry no gender, then
//! equalize pairs that differ only in gender.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::subspace::{self, GenderSubspace};

/// Rejections or in-subspace offsets shorter than this are degenerate.
pub const DEGENERATE_NORM: f64 = 1e-10;

/// Words that legitimately carry gender and are left untouched by
/// neutralization.
#[derive(Debug, Clone, PartialEq)]
pub struct GenderSpecificLexicon {
    tokens: HashSet<String>,
    source: Option<PathBuf>,
}

impl GenderSpecificLexicon {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let tokens: HashSet<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::invalid("gender-specific lexicon is empty"));
        }
        Ok(GenderSpecificLexicon { tokens, source: None })
    }

    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lex = Self::parse(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        lex.source = Some(path.to_path_buf());
        Ok(lex)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }
}

/// Pairs to be made symmetric about the neutral space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EqualitySetList {
    sets: Vec<(String, String)>,
}

impl EqualitySetList {
    pub fn new<A: Into<String>, B: Into<String>>(sets: impl IntoIterator<Item = (A, B)>) -> Result<Self> {
        let sets: Vec<(String, String)> = sets.into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        if let Some((a, _)) = sets.iter().find(|(a, b)| a == b) {
            return Err(Error::invalid(format!("equality set ({a:?}, {a:?}) repeats a token")));
        }
        Ok(EqualitySetList { sets })
    }

    /// JSON array of two-element string arrays. Larger sets are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<Vec<String>> =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("equality sets: {e}")))?;
        let mut sets = Vec::with_capacity(raw.len());
        for (i, s) in raw.into_iter().enumerate() {
            match <[String; 2]>::try_from(s) {
                Ok([a, b]) => sets.push((a, b)),
                Err(s) => {
                    return Err(Error::invalid(format!(
                        "equality set {i} has {} members; only pairs are supported",
                        s.len()
                    )))
                }
            }
        }
        Self::new(sets)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn sets(&self) -> &[(String, String)] {
        &self.sets
    }

    pub fn contains(&self, token: &str) -> bool {
        self.sets.iter().any(|(a, b)| a == token || b == token)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DebiasStats {
    pub neutralized: usize,
    pub equalized: usize,
    /// Words lying entirely inside the subspace, left unchanged.
    pub degenerate_words: Vec<String>,
    /// Equality sets skipped for missing tokens or a vanishing offset.
    pub skipped_sets: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct Debiased {
    pub matrix: EmbeddingMatrix,
    pub stats: DebiasStats,
}

fn check_dims(m: &EmbeddingMatrix, g: &GenderSubspace) -> Result<()> {
    if m.dim() != g.dim {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: g.dim,
        });
    }
    Ok(())
}

/// Removes the subspace component of every word that is neither
/// gender-specific nor in an equality set, and rescales to unit length.
pub fn neutralize(
    m: &EmbeddingMatrix,
    g: &GenderSubspace,
    specific: &GenderSpecificLexicon,
    sets: &EqualitySetList,
) -> Result<Debiased> {
    check_dims(m, g)?;
    let policy = m.case_policy();
    let keep: HashSet<String> = specific
        .tokens
        .iter()
        .map(String::as_str)
        .chain(sets.sets.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]))
        .map(|t| policy.apply(t).into_owned())
        .collect();
    let results: Vec<(usize, std::result::Result<Vec<f64>, ()>)> = (0..m.len())
        .into_par_iter()
        .filter_map(|i| {
            let row = m.row(i);
            if keep.contains(row.word) {
                return None;
            }
            let mut w = subspace::reject(row.vec, g).expect("dimensions checked");
            if linalg::normalize(&mut w) < DEGENERATE_NORM {
                Some((i, Err(())))
            } else {
                Some((i, Ok(w)))
            }
        })
        .collect();

    let mut stats = DebiasStats::default();
    let mut replaced = Vec::with_capacity(results.len());
    for (i, r) in results {
        match r {
            Ok(w) => {
                stats.neutralized += 1;
                replaced.push((i, w));
            }
            Err(()) => {
                let word = m.row(i).word.to_string();
                warn!("{word:?} lies inside the subspace; left unchanged");
                stats.degenerate_words.push(word);
            }
        }
    }
    Ok(Debiased {
        matrix: m.with_replaced_rows(replaced),
        stats,
    })
}

/// Places each pair symmetrically about the neutral space.
///
/// For a pair `{e₁, e₂}` with midpoint `μ`, let `ν` be `μ` with its subspace
/// component removed and `βᵢ = proj(eᵢ) − proj(μ)`. Each member becomes
/// `ν + √(1 − ‖ν‖²) · βᵢ/‖βᵢ‖`.
pub fn equalize(m: &EmbeddingMatrix, g: &GenderSubspace, sets: &EqualitySetList) -> Result<Debiased> {
    check_dims(m, g)?;
    let mut stats = DebiasStats::default();
    let mut replaced = Vec::new();
    for (a, b) in sets.sets() {
        let (Some(ia), Some(ib)) = (m.index_of(a), m.index_of(b)) else {
            warn!("equality set ({a}, {b}) not in vocabulary; skipped");
            stats.skipped_sets.push((a.clone(), b.clone()));
            continue;
        };
        match equalize_pair(m.row(ia).vec, m.row(ib).vec, g) {
            Some((ea, eb)) => {
                replaced.push((ia, ea));
                replaced.push((ib, eb));
                stats.equalized += 1;
            }
            None => {
                warn!("equality set ({a}, {b}) has no in-subspace offset; skipped");
                stats.skipped_sets.push((a.clone(), b.clone()));
            }
        }
    }
    Ok(Debiased {
        matrix: m.with_replaced_rows(replaced),
        stats,
    })
}

fn equalize_pair(e1: &[f64], e2: &[f64], g: &GenderSubspace) -> Option<(Vec<f64>, Vec<f64>)> {
    let mu: Vec<f64> = e1.iter().zip(e2).map(|(x, y)| (x + y) / 2.0).collect();
    let mu_proj = subspace::project(&mu, g).ok()?;
    let nu = linalg::sub(&mu, &mu_proj);
    let scale = (1.0 - linalg::dot(&nu, &nu)).max(0.0).sqrt();
    let mut out = Vec::with_capacity(2);
    for e in [e1, e2] {
        let mut beta = linalg::sub(&subspace::project(e, g).ok()?, &mu_proj);
        if linalg::normalize(&mut beta) < DEGENERATE_NORM {
            return None;
        }
        let mut v = nu.clone();
        linalg::axpy(&mut v, scale, &beta);
        out.push(v);
    }
    let e2 = out.pop()?;
    let e1 = out.pop()?;
    Some((e1, e2))
}

/// Neutralize followed by equalize. The input matrix is not modified.
pub fn hard_debias(
    m: &EmbeddingMatrix,
    g: &GenderSubspace,
    specific: &GenderSpecificLexicon,
    sets: &EqualitySetList,
) -> Result<Debiased> {
    let neutral = neutralize(m, g, specific, sets)?;
    let equal = equalize(&neutral.matrix, g, sets)?;
    Ok(Debiased {
        matrix: equal.matrix,
        stats: DebiasStats {
            neutralized: neutral.stats.neutralized,
            equalized: equal.stats.equalized,
            degenerate_words: neutral.stats.degenerate_words,
            skipped_sets: equal.stats.skipped_sets,
        },
    })
}
