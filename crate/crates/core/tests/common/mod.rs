#![allow(dead_code)]

use std::path::PathBuf;

use genfair::audit::{AuditConfig, AuditInputs, AuditReport, Provenance};
use genfair::bias::{BiasMeasure, Normalization};
use genfair::corpus::{CompletionRecord, ProfessionLexicon};
use genfair::embedding::{CasePolicy, EmbeddingMatrix};
use genfair::fixtures::{planted_axis, PlantedAxisConfig, PlantedFixture};
use genfair::linalg;
use genfair::subspace::{fit_subspace, GenderSubspace};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn test_data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// Planted-axis fixture extended with single-token "professions" whose
/// unit-interval bias under the fitted subspace is set exactly.
pub struct CalibratedFixture {
    pub base: PlantedFixture,
    pub matrix: EmbeddingMatrix,
    pub subspace: GenderSubspace,
    pub lexicon: ProfessionLexicon,
}

/// `targets` are `(token, unit_interval bias)`.
pub fn calibrated(targets: &[(&str, f64)]) -> CalibratedFixture {
    let base = planted_axis(&PlantedAxisConfig {
        n_filler: 50,
        ..Default::default()
    })
    .unwrap();
    let subspace = fit_subspace(&base.matrix, &base.pairs, 1).unwrap();
    let g = subspace.direction().to_vec();
    let mut rows = base.rows.clone();
    for (i, (token, unit)) in targets.iter().enumerate() {
        let raw = 2.0 * unit - 1.0;
        // A filler direction with the g component removed carries the rest.
        let mut other = base.matrix.row(base.matrix.len() - 1 - i).vec.to_vec();
        let c = linalg::dot(&other, &g);
        linalg::axpy(&mut other, -c, &g);
        linalg::normalize(&mut other);
        let mut v: Vec<f64> = other.iter().map(|x| x * (1.0 - raw * raw).sqrt()).collect();
        linalg::axpy(&mut v, raw, &g);
        rows.push((token.to_string(), v));
    }
    let matrix = EmbeddingMatrix::from_rows(rows, CasePolicy::Lowercase).unwrap();
    let lexicon = ProfessionLexicon::new(targets.iter().map(|(t, _)| *t)).unwrap();
    CalibratedFixture {
        base,
        matrix,
        subspace,
        lexicon,
    }
}

impl CalibratedFixture {
    pub fn measure(&self, normalization: Normalization) -> BiasMeasure<'_> {
        BiasMeasure::new("gender", &self.subspace, &self.matrix, normalization).unwrap()
    }

    pub fn audit(&self, cfg: &AuditConfig, corpus: &[CompletionRecord]) -> genfair::Result<AuditReport> {
        let measures = cfg
            .measures
            .iter()
            .map(|m| BiasMeasure::new(&m.name, &self.subspace, &self.matrix, m.normalization).unwrap())
            .collect();
        genfair::audit::run_audit(
            cfg,
            corpus,
            &AuditInputs {
                embedding: &self.matrix,
                measures,
                lexicon: &self.lexicon,
                provenance: Provenance::default(),
            },
        )
    }
}

pub fn pair_config(u: &str, v: &str, d: f64) -> AuditConfig {
    let mut cfg = AuditConfig::new(vec![(u.to_string(), v.to_string())]);
    cfg.d_override = Some(d);
    cfg
}
