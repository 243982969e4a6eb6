//! Fairness audits over prompt pairs.
//!
//! A generator is fair for a pair `(u, v)` when the distance between its
//! output bias for `u` and for `v` does not exceed the prompt distance
//! `d(u, v)`. Two comparisons are supported: the absolute difference of
//! expected biases, and the total variation distance between binned bias
//! distributions. With several measures, a pair violates when any measure
//! does.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{expected_bias, BiasMeasure, Estimate, ExclusionTally, Normalization};
use crate::corpus::{extract_profession, CompletionRecord, ProfessionLexicon};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::similarity::{Prompt, SimilarityMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|E[b(C(u))] − E[b(C(v))]|`
    #[default]
    Expectation,
    /// Total variation between binned `unit_interval` bias histograms.
    TotalVariation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub name: String,
    #[serde(default = "unit_interval")]
    pub normalization: Normalization,
    /// Subspace file for this measure; relative paths are resolved against
    /// the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<PathBuf>,
}

fn unit_interval() -> Normalization {
    Normalization::UnitInterval
}

fn raw_signed() -> Normalization {
    Normalization::RawSigned
}

fn default_measures() -> Vec<MeasureSpec> {
    vec![MeasureSpec {
        name: "gender".into(),
        normalization: Normalization::UnitInterval,
        subspace: None,
    }]
}

fn default_tv_bins() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub prompt_pairs: Vec<(String, String)>,
    #[serde(default)]
    pub metric: SimilarityMetric,
    /// Constant prompt distance used instead of the metric.
    #[serde(default)]
    pub d_override: Option<f64>,
    #[serde(default = "default_measures")]
    pub measures: Vec<MeasureSpec>,
    #[serde(default)]
    pub comparison: Comparison,
    #[serde(default = "default_tv_bins")]
    pub tv_bins: usize,
    #[serde(default)]
    pub slack: f64,
    /// Prompt text → group label for aggregate rows. Labels are inferred
    /// from gendered words when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<BTreeMap<String, String>>,
    /// Normalization used for per-prompt and group tables.
    #[serde(default = "raw_signed")]
    pub display: Normalization,
    /// Profession lexicon file; the bundled lexicon is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub professions: Option<PathBuf>,
    /// Restrict the audit to these models, in this order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<String>>,
}

impl AuditConfig {
    pub fn new(prompt_pairs: Vec<(String, String)>) -> Self {
        AuditConfig {
            prompt_pairs,
            metric: SimilarityMetric::default(),
            d_override: None,
            measures: default_measures(),
            comparison: Comparison::default(),
            tv_bins: default_tv_bins(),
            slack: 0.0,
            groups: None,
            display: Normalization::RawSigned,
            professions: None,
            models: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt_pairs.is_empty() {
            return Err(Error::invalid("audit config needs at least one prompt pair"));
        }
        if self.measures.is_empty() {
            return Err(Error::invalid("audit config needs at least one measure"));
        }
        let mut names: Vec<&str> = self.measures.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("measure names must be unique"));
        }
        if self.tv_bins < 2 {
            return Err(Error::invalid("tv_bins must be at least 2"));
        }
        if !(self.slack.is_finite() && self.slack >= 0.0) {
            return Err(Error::invalid("slack must be a non-negative number"));
        }
        if let Some(d) = self.d_override {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::invalid("d_override must lie in [0, 1]"));
            }
        }
        self.metric.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AuditConfig = serde_json::from_str(text).map_err(|e| Error::invalid(format!("audit config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Distinct prompts in pair order.
    pub fn prompts(&self) -> Vec<Prompt> {
        let mut seen = Vec::<String>::new();
        let mut out = Vec::new();
        for (u, v) in &self.prompt_pairs {
            for text in [u, v] {
                let p = Prompt::new(text.as_str());
                let key = p.normalized();
                if !seen.contains(&key) {
                    seen.push(key);
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Where the report's inputs came from. Deliberately free of timestamps so
/// that reports are reproducible byte for byte.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: Option<String>,
    pub embedding_path: Option<String>,
    pub corpus_path: Option<String>,
    pub subspace_path: Option<String>,
    pub tool_version: String,
}

pub struct AuditInputs<'a> {
    pub embedding: &'a EmbeddingMatrix,
    pub measures: Vec<BiasMeasure<'a>>,
    pub lexicon: &'a ProfessionLexicon,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub raw_signed: Estimate,
    pub unit_interval: Estimate,
}

impl MeasureEstimate {
    pub fn get(&self, n: Normalization) -> &Estimate {
        match n {
            Normalization::RawSigned => &self.raw_signed,
            Normalization::UnitInterval => &self.unit_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSummary {
    pub prompt: String,
    pub group: Option<String>,
    pub n_samples: usize,
    pub n_scored: usize,
    pub n_excluded: usize,
    pub exclusions: ExclusionTally,
    pub measures: BTreeMap<String, MeasureEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMeasure {
    /// `|E_u − E_v|` or the total variation distance, per the comparison.
    pub residual: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub u: String,
    pub v: String,
    pub d: f64,
    /// `d + slack`
    pub threshold: f64,
    pub measures: BTreeMap<String, PairMeasure>,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub group: String,
    pub measure: String,
    pub n_prompts: usize,
    pub raw_signed: f64,
    pub unit_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAudit {
    pub model: String,
    pub prompts: Vec<PromptSummary>,
    pub pairs: Vec<PairResult>,
    pub groups: Vec<GroupMean>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureInfo {
    pub name: String,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub comparison: Comparison,
    pub metric: SimilarityMetric,
    pub d_override: Option<f64>,
    pub slack: f64,
    pub tv_bins: usize,
    pub display: Normalization,
    pub measures: Vec<MeasureInfo>,
    pub provenance: Provenance,
    pub models: Vec<ModelAudit>,
    pub violations: usize,
}

impl AuditReport {
    pub fn has_violations(&self) -> bool {
        self.violations > 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("report: {e}")))
    }

    pub fn model(&self, name: &str) -> Option<&ModelAudit> {
        self.models.iter().find(|m| m.model == name)
    }
}

/// Total variation distance between the histograms of two samples on
/// `bins` equal-width bins over `[0, 1]`. Values outside are clamped.
pub fn total_variation(u: &[f64], v: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::invalid("total variation needs at least 2 bins"));
    }
    if u.is_empty() || v.is_empty() {
        return Err(Error::EmptySample(String::new()));
    }
    let hu = histogram(u, bins);
    let hv = histogram(v, bins);
    let (nu, nv) = (u.len() as f64, v.len() as f64);
    let tv = hu
        .iter()
        .zip(&hv)
        .map(|(a, b)| (*a as f64 / nu - *b as f64 / nv).abs())
        .sum::<f64>()
        / 2.0;
    Ok(tv.clamp(0.0, 1.0))
}

fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut h = vec![0usize; bins];
    for v in values {
        let i = (v.clamp(0.0, 1.0) * bins as f64).floor() as usize;
        h[i.min(bins - 1)] += 1;
    }
    h
}

/// Unweighted mean per group label. Keys of `grouping` are matched to
/// prompts by normalized text.
pub fn group_means(values: &[(&str, f64)], grouping: &BTreeMap<String, String>) -> Result<BTreeMap<String, Estimate>> {
    let labels: HashMap<String, &str> = grouping
        .iter()
        .map(|(p, g)| (Prompt::new(p.as_str()).normalized(), g.as_str()))
        .collect();
    let mut buckets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (prompt, value) in values {
        let label = labels
            .get(&Prompt::new(*prompt).normalized())
            .ok_or_else(|| Error::MissingLabel(prompt.to_string()))?;
        buckets.entry(label.to_string()).or_default().push(*value);
    }
    buckets
        .into_iter()
        .map(|(g, vals)| Ok((g, expected_bias(&vals)?)))
        .collect()
}

/// Group means of every model and measure in a report, in both
/// normalizations.
pub fn aggregate_by_group(
    report: &AuditReport,
    grouping: &BTreeMap<String, String>,
) -> Result<Vec<(String, Vec<GroupMean>)>> {
    report
        .models
        .iter()
        .map(|m| {
            Ok((
                m.model.clone(),
                model_group_means(&m.prompts, &report.measures, grouping)?,
            ))
        })
        .collect()
}

fn model_group_means(
    prompts: &[PromptSummary],
    measures: &[MeasureInfo],
    grouping: &BTreeMap<String, String>,
) -> Result<Vec<GroupMean>> {
    let mut out = Vec::new();
    for info in measures {
        let collect = |n: Normalization| -> Result<BTreeMap<String, Estimate>> {
            let vals: Vec<(&str, f64)> = prompts
                .iter()
                .map(|p| (p.prompt.as_str(), p.measures[&info.name].get(n).mean))
                .collect();
            group_means(&vals, grouping)
        };
        let raw = collect(Normalization::RawSigned)?;
        let unit = collect(Normalization::UnitInterval)?;
        for (group, r) in raw {
            out.push(GroupMean {
                measure: info.name.clone(),
                n_prompts: r.n,
                raw_signed: r.mean,
                unit_interval: unit[&group].mean,
                group,
            });
        }
    }
    Ok(out)
}

struct ScoredPrompt {
    summary: PromptSummary,
    /// Measure name → unit-interval biases of scored samples.
    unit_values: BTreeMap<String, Vec<f64>>,
}

fn score_prompt(
    prompt: &Prompt,
    completions: &[&str],
    inputs: &AuditInputs<'_>,
    group: Option<String>,
) -> Result<ScoredPrompt> {
    let professions: Vec<Option<String>> = completions
        .par_iter()
        .map(|c| extract_profession(c, inputs.lexicon))
        .collect();

    let mut tally = ExclusionTally::default();
    let mut scored: Vec<&str> = Vec::with_capacity(professions.len());
    for p in &professions {
        match p {
            None => tally.no_profession += 1,
            Some(t) if !inputs.embedding.contains(t) => tally.out_of_vocabulary += 1,
            Some(t) => scored.push(t),
        }
    }
    if scored.is_empty() {
        return Err(Error::EmptySample(prompt.text.clone()));
    }

    let mut measures = BTreeMap::new();
    let mut unit_values = BTreeMap::new();
    for bm in &inputs.measures {
        let raw: Vec<f64> = scored.iter().map(|t| bm.raw_bias(t)).collect::<Result<_>>()?;
        let unit: Vec<f64> = raw.iter().map(|r| Normalization::UnitInterval.apply(*r)).collect();
        measures.insert(
            bm.name.to_string(),
            MeasureEstimate {
                raw_signed: expected_bias(&raw)?,
                unit_interval: expected_bias(&unit)?,
            },
        );
        unit_values.insert(bm.name.to_string(), unit);
    }
    Ok(ScoredPrompt {
        summary: PromptSummary {
            prompt: prompt.text.clone(),
            group,
            n_samples: completions.len(),
            n_scored: scored.len(),
            n_excluded: tally.total(),
            exclusions: tally,
            measures,
        },
        unit_values,
    })
}

/// Runs the audit with the comparison named in the config.
pub fn run_audit(cfg: &AuditConfig, corpus: &[CompletionRecord], inputs: &AuditInputs<'_>) -> Result<AuditReport> {
    cfg.validate()?;
    if inputs.measures.is_empty() {
        return Err(Error::invalid("no bias measures supplied"));
    }
    if corpus.is_empty() {
        return Err(Error::invalid("corpus contains no records"));
    }
    let measure_norm: BTreeMap<&str, Normalization> =
        inputs.measures.iter().map(|m| (m.name, m.normalization)).collect();

    let models: Vec<String> = match &cfg.models {
        Some(m) => m.clone(),
        None => {
            let mut seen = Vec::<String>::new();
            for r in corpus {
                if !seen.contains(&r.model) {
                    seen.push(r.model.clone());
                }
            }
            seen
        }
    };

    let prompts = cfg.prompts();
    let explicit_groups: Option<HashMap<String, String>> = cfg.groups.as_ref().map(|g| {
        g.iter()
            .map(|(p, l)| (Prompt::new(p.as_str()).normalized(), l.clone()))
            .collect()
    });
    let label_of = |p: &Prompt| -> Option<String> {
        match &explicit_groups {
            Some(g) => g.get(&p.normalized()).cloned(),
            None => p.demographic_tag.clone(),
        }
    };

    let mut distances = Vec::with_capacity(cfg.prompt_pairs.len());
    for (u, v) in &cfg.prompt_pairs {
        let d = match cfg.d_override {
            Some(d) => d,
            None => cfg.metric.distance(
                &Prompt::new(u.as_str()),
                &Prompt::new(v.as_str()),
                Some(inputs.embedding),
            )?,
        };
        distances.push(d);
    }

    let mut model_audits = Vec::with_capacity(models.len());
    for model in &models {
        let mut scored: Vec<ScoredPrompt> = Vec::with_capacity(prompts.len());
        for prompt in &prompts {
            let key = prompt.normalized();
            let completions: Vec<&str> = corpus
                .iter()
                .filter(|r| &r.model == model && r.prompt.normalized() == key)
                .flat_map(|r| r.completions.iter().map(String::as_str))
                .collect();
            if !corpus.iter().any(|r| &r.model == model && r.prompt.normalized() == key) {
                return Err(Error::PromptNotInCorpus {
                    prompt: prompt.text.clone(),
                    model: model.clone(),
                });
            }
            scored.push(score_prompt(prompt, &completions, inputs, label_of(prompt))?);
        }
        let by_key: HashMap<String, &ScoredPrompt> =
            prompts.iter().zip(&scored).map(|(p, s)| (p.normalized(), s)).collect();

        let mut pairs = Vec::with_capacity(cfg.prompt_pairs.len());
        for ((u, v), d) in cfg.prompt_pairs.iter().zip(&distances) {
            let su = by_key[&Prompt::new(u.as_str()).normalized()];
            let sv = by_key[&Prompt::new(v.as_str()).normalized()];
            let threshold = d + cfg.slack;
            let mut measures = BTreeMap::new();
            for (name, norm) in &measure_norm {
                let residual = match cfg.comparison {
                    Comparison::Expectation => {
                        let mu = su.summary.measures[*name].get(*norm).mean;
                        let mv = sv.summary.measures[*name].get(*norm).mean;
                        (mu - mv).abs()
                    }
                    Comparison::TotalVariation => {
                        total_variation(&su.unit_values[*name], &sv.unit_values[*name], cfg.tv_bins)?
                    }
                };
                measures.insert(
                    name.to_string(),
                    PairMeasure {
                        residual,
                        violated: residual > threshold,
                    },
                );
            }
            let violated = measures.values().any(|m| m.violated);
            pairs.push(PairResult {
                u: u.clone(),
                v: v.clone(),
                d: *d,
                threshold,
                measures,
                violated,
            });
        }

        let summaries: Vec<PromptSummary> = scored.into_iter().map(|s| s.summary).collect();
        let measure_info: Vec<MeasureInfo> = measure_norm
            .iter()
            .map(|(n, norm)| MeasureInfo {
                name: n.to_string(),
                normalization: *norm,
            })
            .collect();
        let grouping: Option<BTreeMap<String, String>> = summaries
            .iter()
            .map(|s| s.group.clone().map(|g| (s.prompt.clone(), g)))
            .collect();
        let groups = match grouping {
            Some(g) => model_group_means(&summaries, &measure_info, &g)?,
            None if cfg.groups.is_some() => {
                let missing = summaries
                    .iter()
                    .find(|s| s.group.is_none())
                    .expect("some prompt unlabeled");
                return Err(Error::MissingLabel(missing.prompt.clone()));
            }
            None => {
                warn!("some prompts have no inferable group; group averages omitted");
                Vec::new()
            }
        };
        let violations = pairs.iter().filter(|p| p.violated).count();
        model_audits.push(ModelAudit {
            model: model.clone(),
            prompts: summaries,
            pairs,
            groups,
            violations,
        });
    }

    let violations = model_audits.iter().map(|m| m.violations).sum();
    Ok(AuditReport {
        comparison: cfg.comparison,
        metric: cfg.metric,
        d_override: cfg.d_override,
        slack: cfg.slack,
        tv_bins: cfg.tv_bins,
        display: cfg.display,
        measures: measure_norm
            .iter()
            .map(|(n, norm)| MeasureInfo {
                name: n.to_string(),
                normalization: *norm,
            })
            .collect(),
        provenance: inputs.provenance.clone(),
        models: model_audits,
        violations,
    })
}

/// Audit comparing expected biases.
pub fn audit_expectation(
    cfg: &AuditConfig,
    corpus: &[CompletionRecord],
    inputs: &AuditInputs<'_>,
) -> Result<AuditReport> {
    let cfg = AuditConfig {
        comparison: Comparison::Expectation,
        ..cfg.clone()
    };
    run_audit(&cfg, corpus, inputs)
}

/// Audit comparing binned bias distributions by total variation.
pub fn audit_total_variation(
    cfg: &AuditConfig,
    corpus: &[CompletionRecord],
    inputs: &AuditInputs<'_>,
) -> Result<AuditReport> {
    let cfg = AuditConfig {
        comparison: Comparison::TotalVariation,
        ..cfg.clone()
    };
    run_audit(&cfg, corpus, inputs)
}
