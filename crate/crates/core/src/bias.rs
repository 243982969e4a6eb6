//! Bias scores for words and completions from a fitted subspace.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::subspace::GenderSubspace;

/// How raw projections `w·g ∈ [-1, 1]` are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    RawSigned,
    UnitInterval,
}

impl Normalization {
    /// Maps a raw score through this normalization. `UnitInterval` is
    /// `(raw + 1) / 2`, clamped to `[0, 1]`.
    pub fn apply(self, raw: f64) -> f64 {
        let raw = raw.clamp(-1.0, 1.0);
        match self {
            Normalization::RawSigned => raw,
            Normalization::UnitInterval => ((raw + 1.0) / 2.0).clamp(0.0, 1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::RawSigned => "raw_signed",
            Normalization::UnitInterval => "unit_interval",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a completion did not produce a score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionTally {
    pub no_profession: usize,
    pub out_of_vocabulary: usize,
}

impl ExclusionTally {
    pub fn total(&self) -> usize {
        self.no_profession + self.out_of_vocabulary
    }
}

/// A named bias function over the embedding of a completion's profession.
#[derive(Debug, Clone, Copy)]
pub struct BiasMeasure<'a> {
    pub name: &'a str,
    pub subspace: &'a GenderSubspace,
    pub embedding: &'a EmbeddingMatrix,
    pub normalization: Normalization,
}

impl<'a> BiasMeasure<'a> {
    pub fn new(
        name: &'a str,
        subspace: &'a GenderSubspace,
        embedding: &'a EmbeddingMatrix,
        normalization: Normalization,
    ) -> Result<Self> {
        if subspace.dim != embedding.dim() {
            return Err(Error::DimensionMismatch {
                expected: embedding.dim(),
                found: subspace.dim,
            });
        }
        Ok(BiasMeasure {
            name,
            subspace,
            embedding,
            normalization,
        })
    }

    /// Signed projection of a unit vector onto the subspace.
    ///
    /// With one basis vector this is `w·b₁`. With more, the magnitude of the
    /// whole projection carries the sign of the first coordinate.
    pub fn raw_vector_bias(&self, w: &[f64]) -> Result<f64> {
        let coords = self.subspace.coordinates(w)?;
        let raw = if coords.len() == 1 {
            coords[0]
        } else {
            let magnitude = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
            if coords[0] < 0.0 {
                -magnitude
            } else {
                magnitude
            }
        };
        Ok(raw.clamp(-1.0, 1.0))
    }

    pub fn raw_bias(&self, token: &str) -> Result<f64> {
        let w = self
            .embedding
            .lookup(token)
            .ok_or_else(|| Error::OutOfVocabulary(token.to_string()))?;
        self.raw_vector_bias(w.vec)
    }

    /// Bias of a single word under this measure's normalization.
    pub fn word_bias(&self, token: &str) -> Result<f64> {
        Ok(self.normalization.apply(self.raw_bias(token)?))
    }

    /// Per-basis-vector coordinates, for diagnostics when `k > 1`.
    pub fn components(&self, token: &str) -> Result<Vec<f64>> {
        let w = self
            .embedding
            .lookup(token)
            .ok_or_else(|| Error::OutOfVocabulary(token.to_string()))?;
        self.subspace.coordinates(w.vec)
    }

    /// Bias of a completion given its extracted profession. Missing or
    /// out-of-vocabulary professions yield `None` and are counted.
    pub fn completion_bias(&self, profession: Option<&str>, tally: &mut ExclusionTally) -> Option<f64> {
        let Some(token) = profession else {
            tally.no_profession += 1;
            return None;
        };
        match self.word_bias(token) {
            Ok(b) => Some(b),
            Err(_) => {
                tally.out_of_vocabulary += 1;
                None
            }
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

/// Mean and standard error (`s / √n`, zero for a single value).
///
/// The mean is clamped to the sample range, so a constant list returns that
/// constant exactly.
pub fn expected_bias(values: &[f64]) -> Result<Estimate> {
    if values.is_empty() {
        return Err(Error::EmptySample(String::new()));
    }
    let n = values.len();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    let mean = (values.iter().sum::<f64>() / n as f64).clamp(lo, hi);
    let se = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate { n, mean, se })
}
