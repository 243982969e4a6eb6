//! A seeded sentence-completion system with known profession distributions.
//!
//! Each prompt draws from its own ChaCha8 stream: the 64-bit spec seed keys
//! the generator and the FNV-1a hash of the prompt text selects the stream.
//! Output therefore does not depend on the order or thread in which prompts
//! are generated.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bias::BiasMeasure;
use crate::corpus::CompletionRecord;
use crate::error::{Error, Result};

pub const DEFAULT_TEMPLATE: &str = "{prompt} a {profession}.";
pub const GENERATOR_NAME: &str = "chacha8-fnv1a-stream";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockSpec {
    /// Prompt text → profession → probability.
    pub rules: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default = "default_template")]
    pub template: String,
    pub seed: u64,
    #[serde(default = "default_model")]
    pub model: String,
    /// Prompts to simulate, in output order. Defaults to every rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts: Option<Vec<String>>,
}

fn default_template() -> String {
    DEFAULT_TEMPLATE.to_string()
}

fn default_model() -> String {
    "mock".to_string()
}

impl MockSpec {
    pub fn new(seed: u64) -> Self {
        MockSpec {
            rules: BTreeMap::new(),
            template: default_template(),
            seed,
            model: default_model(),
            prompts: None,
        }
    }

    pub fn with_rule<S: Into<String>>(mut self, prompt: &str, dist: impl IntoIterator<Item = (S, f64)>) -> Self {
        self.rules.insert(
            prompt.to_string(),
            dist.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        );
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.template.contains("{profession}") {
            return Err(Error::invalid("mock template lacks a {profession} placeholder"));
        }
        for (prompt, dist) in &self.rules {
            if dist.is_empty() {
                return Err(Error::invalid(format!("rule for {prompt:?} is empty")));
            }
            let mut total = 0.0;
            for (prof, p) in dist {
                if prof.trim().is_empty() {
                    return Err(Error::invalid(format!("rule for {prompt:?} has an empty profession")));
                }
                if !(p.is_finite() && *p >= 0.0) {
                    return Err(Error::invalid(format!("probability of {prof:?} for {prompt:?} is {p}")));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "probabilities for {prompt:?} sum to {total}, not 1"
                )));
            }
        }
        if let Some(prompts) = &self.prompts {
            if let Some(p) = prompts.iter().find(|p| !self.rules.contains_key(*p)) {
                return Err(Error::UnknownPrompt(p.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MockSpec = serde_json::from_str(text).map_err(|e| Error::invalid(format!("mock spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn prompt_order(&self) -> Vec<&str> {
        match &self.prompts {
            Some(p) => p.iter().map(String::as_str).collect(),
            None => self.rules.keys().map(String::as_str).collect(),
        }
    }

    fn rule(&self, prompt: &str) -> Result<&BTreeMap<String, f64>> {
        self.rules
            .get(prompt)
            .ok_or_else(|| Error::UnknownPrompt(prompt.to_string()))
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// The generator for one prompt's samples.
pub fn prompt_rng(seed: u64, prompt: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(prompt.as_bytes()));
    rng
}

/// Draws `n` completions for `prompt` by inverse-CDF sampling over the
/// rule's professions in sorted order.
pub fn generate(spec: &MockSpec, prompt: &str, n: usize) -> Result<Vec<String>> {
    let dist = spec.rule(prompt)?;
    let entries: Vec<(&str, f64)> = dist.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let last_positive = entries.iter().rposition(|(_, p)| *p > 0.0).unwrap_or(0);
    let mut rng = prompt_rng(spec.seed, prompt);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = entries[last_positive].0;
        for (prof, p) in &entries[..last_positive] {
            acc += p;
            if u < acc {
                pick = prof;
                break;
            }
        }
        out.push(spec.template.replace("{prompt}", prompt).replace("{profession}", pick));
    }
    Ok(out)
}

/// One record per prompt in [`MockSpec::prompt_order`].
pub fn simulate(spec: &MockSpec, n: usize) -> Result<Vec<CompletionRecord>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    spec.prompt_order()
        .into_iter()
        .map(|prompt| {
            let completions = generate(spec, prompt, n)?;
            Ok(CompletionRecord::new(
                prompt,
                completions,
                &spec.model,
                json!({ "generator": GENERATOR_NAME, "seed": spec.seed, "n": n }),
            ))
        })
        .collect()
}

/// `Σ p(profession) · b(profession)` under the measure's normalization.
pub fn analytic_expected_bias(spec: &MockSpec, prompt: &str, bm: &BiasMeasure<'_>) -> Result<f64> {
    spec.rule(prompt)?
        .iter()
        .map(|(prof, p)| Ok(p * bm.word_bias(prof)?))
        .sum()
}
