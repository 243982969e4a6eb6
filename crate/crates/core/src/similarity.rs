//! Distances between prompts: lexical Jaccard, embedding-centroid cosine,
//! and a weighted blend of the two. Every distance lies in `[0, 1]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::embedding::{self, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::linalg;

const FEMALE_MARKERS: &[&str] = &[
    "she", "her", "hers", "woman", "women", "girl", "girls", "mother", "daughter", "sister", "wife", "lady",
];
const MALE_MARKERS: &[&str] = &[
    "he",
    "him",
    "his",
    "man",
    "men",
    "boy",
    "boys",
    "father",
    "son",
    "brother",
    "husband",
    "gentleman",
];

/// Lowercases, splits on whitespace and strips non-alphanumeric characters
/// (including ellipses) from both ends of each token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub tokens: Vec<String>,
    pub demographic_tag: Option<String>,
}

impl Prompt {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        let demographic_tag = infer_demographic(&tokens).map(str::to_string);
        Prompt {
            text,
            tokens,
            demographic_tag,
        }
    }

    /// Tokens joined by single spaces; the key used to match prompts.
    pub fn normalized(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn token_set(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }
}

/// `"female"` or `"male"` when the tokens mention exactly one of the two.
pub fn infer_demographic<S: AsRef<str>>(tokens: &[S]) -> Option<&'static str> {
    let has = |markers: &[&str]| tokens.iter().any(|t| markers.contains(&t.as_ref()));
    match (has(FEMALE_MARKERS), has(MALE_MARKERS)) {
        (true, false) => Some("female"),
        (false, true) => Some("male"),
        _ => None,
    }
}

/// `1 − |A ∩ B| / |A ∪ B|` over token sets; two empty sets are at distance 0.
pub fn jaccard_distance(u: &Prompt, v: &Prompt) -> f64 {
    let a = u.token_set();
    let b = v.token_set();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    let inter = a.intersection(&b).count();
    1.0 - inter as f64 / union as f64
}

fn centroid(p: &Prompt, m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    let mut c = vec![0.0; m.dim()];
    let mut hits = 0;
    for t in &p.tokens {
        if let Some(w) = m.lookup(t) {
            linalg::axpy(&mut c, 1.0, w.vec);
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::NoVocabularyOverlap(p.text.clone()));
    }
    linalg::normalize(&mut c);
    Ok(c)
}

/// `(1 − cos(c_u, c_v)) / 2` between the renormalized centroids of the
/// in-vocabulary token vectors. Out-of-vocabulary tokens are skipped.
pub fn semantic_distance(u: &Prompt, v: &Prompt, m: &EmbeddingMatrix) -> Result<f64> {
    let cu = centroid(u, m)?;
    let cv = centroid(v, m)?;
    if cu == cv {
        return Ok(0.0);
    }
    let cos = embedding::cosine(&cu, &cv)?;
    Ok(((1.0 - cos) / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Jaccard,
    SemanticCosine,
    Composite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMetric {
    #[serde(default)]
    pub kind: MetricKind,
    /// `(lexical, semantic)` weights for the composite metric.
    #[serde(default = "default_weights")]
    pub weights: (f64, f64),
}

fn default_weights() -> (f64, f64) {
    (0.5, 0.5)
}

impl Default for SimilarityMetric {
    fn default() -> Self {
        SimilarityMetric {
            kind: MetricKind::Jaccard,
            weights: default_weights(),
        }
    }
}

impl SimilarityMetric {
    pub fn jaccard() -> Self {
        SimilarityMetric::default()
    }

    pub fn semantic() -> Self {
        SimilarityMetric {
            kind: MetricKind::SemanticCosine,
            ..Default::default()
        }
    }

    pub fn composite(lexical: f64, semantic: f64) -> Result<Self> {
        let m = SimilarityMetric {
            kind: MetricKind::Composite,
            weights: (lexical, semantic),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let (l, s) = self.weights;
        if self.kind == MetricKind::Composite
            && (l < 0.0 || s < 0.0 || !l.is_finite() || !s.is_finite() || (l + s - 1.0).abs() > 1e-9)
        {
            return Err(Error::invalid(format!(
                "composite weights ({l}, {s}) must be non-negative and sum to 1"
            )));
        }
        Ok(())
    }

    pub fn needs_embedding(&self) -> bool {
        self.kind != MetricKind::Jaccard
    }

    pub fn distance(&self, u: &Prompt, v: &Prompt, m: Option<&EmbeddingMatrix>) -> Result<f64> {
        let embedding = || m.ok_or(Error::MissingEmbedding);
        let d = match self.kind {
            MetricKind::Jaccard => jaccard_distance(u, v),
            MetricKind::SemanticCosine => semantic_distance(u, v, embedding()?)?,
            MetricKind::Composite => {
                let (l, s) = self.weights;
                l * jaccard_distance(u, v) + s * semantic_distance(u, v, embedding()?)?
            }
        };
        Ok(d.clamp(0.0, 1.0))
    }
}
