//! Seeded synthetic embeddings with a known ("planted") gender axis.
//!
//! Definitional pairs share a base direction and differ by `±strength`
//! along the planted axis, plus Gaussian noise. Neutral filler words are
//! isotropic Gaussian draws. The stereotyped variant adds professions whose
//! axis component is set explicitly, so debiasing has something to remove.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::debias::{EqualitySetList, GenderSpecificLexicon};
use crate::embedding::{CasePolicy, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mock::MockSpec;
use crate::subspace::DefinitionalPairSet;

/// `(male, female)` pairs used by the fixtures, in order.
pub const GENDER_PAIRS: [(&str, &str); 10] = [
    ("he", "she"),
    ("man", "woman"),
    ("boy", "girl"),
    ("father", "mother"),
    ("son", "daughter"),
    ("brother", "sister"),
    ("king", "queen"),
    ("husband", "wife"),
    ("uncle", "aunt"),
    ("gentleman", "lady"),
];

/// Professions leaning female in the stereotyped fixture.
pub const FEMALE_STEREOTYPED: [&str; 4] = ["nurse", "housekeeper", "receptionist", "hairdresser"];
/// Professions leaning male in the stereotyped fixture.
pub const MALE_STEREOTYPED: [&str; 4] = ["engineer", "carpenter", "mechanic", "plumber"];
/// Professions with no axis component.
pub const NEUTRAL_PROFESSIONS: [&str; 4] = ["lawyer", "teacher", "writer", "doctor"];
/// Professions gendered by definition, `(male, female)`.
pub const DEFINITIONAL_PROFESSIONS: [(&str, &str); 3] = [
    ("congressman", "congresswoman"),
    ("businessman", "businesswoman"),
    ("waiter", "waitress"),
];

#[derive(Debug, Clone)]
pub struct PlantedAxisConfig {
    pub dim: usize,
    pub n_pairs: usize,
    /// Standard deviation of per-coordinate noise on pair words.
    pub noise: f64,
    /// Component of each pair word along the planted axis before noise.
    pub strength: f64,
    /// Number of neutral filler words.
    pub n_filler: usize,
    pub seed: u64,
}

impl Default for PlantedAxisConfig {
    fn default() -> Self {
        PlantedAxisConfig {
            dim: 50,
            n_pairs: 10,
            noise: 0.01,
            strength: 0.5,
            n_filler: 1000,
            seed: 2019,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub matrix: EmbeddingMatrix,
    /// Unit vector; female words have positive coordinates along it.
    pub axis: Vec<f64>,
    pub pairs: DefinitionalPairSet,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl PlantedFixture {
    pub fn gender_specific(&self) -> GenderSpecificLexicon {
        GenderSpecificLexicon::new(self.pairs.tokens().map(str::to_string)).expect("pair set is non-empty")
    }

    pub fn equality_sets(&self) -> EqualitySetList {
        EqualitySetList::new(self.pairs.pairs().iter().cloned()).expect("pairs are distinct")
    }
}

fn pair_names(i: usize) -> (String, String) {
    match GENDER_PAIRS.get(i) {
        Some((m, f)) => (m.to_string(), f.to_string()),
        None => (format!("male{i:03}"), format!("female{i:03}")),
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// A unit vector orthogonal to `axis`.
fn orthogonal_unit(rng: &mut ChaCha8Rng, axis: &[f64]) -> Vec<f64> {
    loop {
        let mut v = gaussian(rng, axis.len());
        let c = linalg::dot(&v, axis);
        linalg::axpy(&mut v, -c, axis);
        if linalg::normalize(&mut v) > 1e-6 {
            return v;
        }
    }
}

/// `cos·base + along·axis` with `cos = √(1 − along²)`.
fn with_axis_component(base: &[f64], axis: &[f64], along: f64) -> Vec<f64> {
    let mut v: Vec<f64> = base.iter().map(|b| b * (1.0 - along * along).max(0.0).sqrt()).collect();
    linalg::axpy(&mut v, along, axis);
    v
}

pub fn planted_axis(cfg: &PlantedAxisConfig) -> Result<PlantedFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut axis = gaussian(&mut rng, cfg.dim);
    linalg::normalize(&mut axis);
    let noise = Normal::new(0.0, cfg.noise).expect("noise is finite and non-negative");

    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..cfg.n_pairs {
        let (male, female) = pair_names(i);
        let base = orthogonal_unit(&mut rng, &axis);
        for (word, sign) in [(&male, -1.0), (&female, 1.0)] {
            let mut v = with_axis_component(&base, &axis, sign * cfg.strength);
            v.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
            rows.push((word.clone(), v));
        }
        pairs.push((male, female));
    }
    rows.push(("potato".to_string(), gaussian(&mut rng, cfg.dim)));
    for i in 0..cfg.n_filler {
        rows.push((format!("word{i:04}"), gaussian(&mut rng, cfg.dim)));
    }
    let matrix = EmbeddingMatrix::from_rows(rows.iter().cloned(), CasePolicy::Lowercase)?;
    Ok(PlantedFixture {
        matrix,
        axis,
        pairs: DefinitionalPairSet::new(pairs)?,
        rows,
    })
}

/// The planted-axis fixture plus professions with stereotype components.
#[derive(Debug, Clone)]
pub struct StereotypedFixture {
    pub base: PlantedFixture,
    pub matrix: EmbeddingMatrix,
    /// Axis component given to stereotyped professions.
    pub stereotype: f64,
}

impl StereotypedFixture {
    /// Definitional pair words plus definitional professions.
    pub fn gender_specific(&self) -> GenderSpecificLexicon {
        let mut tokens: Vec<String> = self.base.pairs.tokens().map(str::to_string).collect();
        for (m, f) in DEFINITIONAL_PROFESSIONS {
            tokens.push(m.to_string());
            tokens.push(f.to_string());
        }
        GenderSpecificLexicon::new(tokens).expect("non-empty")
    }

    pub fn equality_sets(&self) -> EqualitySetList {
        let sets = self.base.pairs.pairs().iter().cloned().chain(
            DEFINITIONAL_PROFESSIONS
                .iter()
                .map(|(m, f)| (m.to_string(), f.to_string())),
        );
        EqualitySetList::new(sets).expect("pairs are distinct")
    }

    /// Female prompts draw stereotyped-female professions more often and
    /// male prompts stereotyped-male ones; both share neutral and
    /// definitional professions.
    pub fn mock_spec(&self, seed: u64) -> MockSpec {
        let female = [
            ("nurse", 0.25),
            ("housekeeper", 0.15),
            ("receptionist", 0.1),
            ("hairdresser", 0.1),
            ("lawyer", 0.1),
            ("teacher", 0.1),
            ("congresswoman", 0.1),
            ("waitress", 0.1),
        ];
        let male = [
            ("engineer", 0.25),
            ("carpenter", 0.15),
            ("mechanic", 0.1),
            ("plumber", 0.1),
            ("lawyer", 0.1),
            ("doctor", 0.1),
            ("congressman", 0.1),
            ("waiter", 0.1),
        ];
        let mut spec = MockSpec::new(seed);
        for (i, t) in crate::corpus::DEFAULT_TEMPLATES.iter().enumerate() {
            spec = if i < 4 {
                spec.with_rule(t, female)
            } else {
                spec.with_rule(t, male)
            };
        }
        spec.prompts = Some(crate::corpus::DEFAULT_TEMPLATES.iter().map(|t| t.to_string()).collect());
        spec
    }
}

/// Paths written by [`StereotypedFixture::write_files`].
#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub embeddings: PathBuf,
    pub pairs: PathBuf,
    pub specific: PathBuf,
    pub equalize: PathBuf,
    pub spec: PathBuf,
    pub audit: PathBuf,
}

impl StereotypedFixture {
    /// Write everything the command-line pipeline needs into `dir`: the
    /// embedding, definitional pairs, gender-specific words, equality
    /// pairs, a mock spec and an audit config over the template pairs.
    pub fn write_files(&self, dir: impl AsRef<Path>, seed: u64) -> Result<FixtureFiles> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| -> Result<PathBuf> {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            Ok(p)
        };
        let pairs: Vec<[&str; 2]> = self
            .base
            .pairs
            .pairs()
            .iter()
            .map(|(a, b)| [a.as_str(), b.as_str()])
            .collect();
        let equality = self.equality_sets();
        let sets: Vec<[&str; 2]> = equality.sets().iter().map(|(a, b)| [a.as_str(), b.as_str()]).collect();
        let mut specific: Vec<String> = self.base.pairs.tokens().map(str::to_string).collect();
        for (m, f) in DEFINITIONAL_PROFESSIONS {
            specific.push(m.to_string());
            specific.push(f.to_string());
        }
        let spec = serde_json::to_string_pretty(&self.mock_spec(seed)).expect("spec serializes");
        Ok(FixtureFiles {
            embeddings: write("embeddings.txt", self.matrix.to_word2vec_text())?,
            pairs: write(
                "pairs.json",
                serde_json::to_string(&pairs).expect("pairs serialize") + "\n",
            )?,
            specific: write("specific.txt", specific.join("\n") + "\n")?,
            equalize: write(
                "equalize.json",
                serde_json::to_string(&sets).expect("sets serialize") + "\n",
            )?,
            spec: write("spec.json", spec + "\n")?,
            audit: write("audit.json", include_str!("../data/template_pairs.json").to_string())?,
        })
    }
}

pub fn stereotyped(cfg: &PlantedAxisConfig, stereotype: f64) -> Result<StereotypedFixture> {
    let base = planted_axis(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut rows = base.rows.clone();
    let axis = &base.axis;
    for w in FEMALE_STEREOTYPED {
        let b = orthogonal_unit(&mut rng, axis);
        rows.push((w.to_string(), with_axis_component(&b, axis, stereotype)));
    }
    for w in MALE_STEREOTYPED {
        let b = orthogonal_unit(&mut rng, axis);
        rows.push((w.to_string(), with_axis_component(&b, axis, -stereotype)));
    }
    for w in NEUTRAL_PROFESSIONS {
        rows.push((w.to_string(), orthogonal_unit(&mut rng, axis)));
    }
    for (m, f) in DEFINITIONAL_PROFESSIONS {
        let b = orthogonal_unit(&mut rng, axis);
        rows.push((m.to_string(), with_axis_component(&b, axis, -cfg.strength)));
        rows.push((f.to_string(), with_axis_component(&b, axis, cfg.strength)));
    }
    let matrix = EmbeddingMatrix::from_rows(rows, CasePolicy::Lowercase)?;
    Ok(StereotypedFixture {
        base,
        matrix,
        stereotype,
    })
}
