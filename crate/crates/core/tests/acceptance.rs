//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Run with `cargo test --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use genfair::audit::{
    aggregate_by_group, total_variation, AuditReport, Comparison, MeasureEstimate, MeasureInfo, ModelAudit,
    PromptSummary, Provenance,
};
use genfair::bias::{BiasMeasure, Estimate, Normalization};
use genfair::corpus::{extract_profession, ProfessionLexicon};
use genfair::debias::hard_debias;
use genfair::embedding::EmbeddingMatrix;
use genfair::fixtures::{planted_axis, stereotyped, PlantedAxisConfig};
use genfair::linalg;
use genfair::mock::{analytic_expected_bias, simulate, MockSpec};
use genfair::report::render_text;
use genfair::similarity::{jaccard_distance, Prompt, SimilarityMetric};
use genfair::subspace::fit_subspace;

use common::*;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_subspace_recovery() -> Result<String, String> {
    let start = Instant::now();
    let f = planted_axis(&PlantedAxisConfig::default()).map_err(|e| e.to_string())?;
    let g = fit_subspace(&f.matrix, &f.pairs, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let cos = linalg::dot(g.direction(), &f.axis);
    ensure(cos >= 0.99, || format!("cosine {cos:.6} < 0.99"))?;
    ensure(elapsed < 1.0, || format!("took {elapsed:.3}s"))?;
    Ok(format!("cosine {cos:.6}, {elapsed:.3}s"))
}

fn c2_debias_invariants() -> Result<String, String> {
    let f = planted_axis(&PlantedAxisConfig::default()).map_err(|e| e.to_string())?;
    ensure(f.matrix.len() >= 1000, || format!("only {} words", f.matrix.len()))?;
    let g = fit_subspace(&f.matrix, &f.pairs, 1).map_err(|e| e.to_string())?;
    let sets = f.equality_sets();
    let out = hard_debias(&f.matrix, &g, &f.gender_specific(), &sets).map_err(|e| e.to_string())?;
    let b = g.direction();
    let mut worst_proj: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    let mut neutral = Vec::new();
    for (word, v) in out.matrix.iter() {
        if sets.contains(word) {
            continue;
        }
        worst_proj = worst_proj.max(linalg::dot(v, b).abs());
        worst_norm = worst_norm.max((linalg::norm(v) - 1.0).abs());
        neutral.push(v);
    }
    ensure(worst_proj <= 1e-8, || format!("|w.b| up to {worst_proj:e}"))?;
    ensure(worst_norm <= 1e-8, || format!("norm error up to {worst_norm:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sample: Vec<&&[f64]> = neutral.choose_multiple(&mut rng, 20).collect();
    let mut worst_gap: f64 = 0.0;
    for (x, y) in sets.sets() {
        let ex = out.matrix.lookup(x).ok_or("missing pair word")?.vec;
        let ey = out.matrix.lookup(y).ok_or("missing pair word")?.vec;
        for n in &sample {
            let dx = linalg::norm(&linalg::sub(ex, n));
            let dy = linalg::norm(&linalg::sub(ey, n));
            worst_gap = worst_gap.max((dx - dy).abs());
        }
    }
    ensure(worst_gap <= 1e-6, || format!("equidistance gap {worst_gap:e}"))?;
    Ok(format!(
        "{} words; max |w.b| {worst_proj:.1e}, max norm error {worst_norm:.1e}, max equidistance gap {worst_gap:.1e}",
        out.matrix.len()
    ))
}

fn random_prompt(rng: &mut ChaCha8Rng) -> Prompt {
    const VOCAB: [&str; 12] = [
        "the", "woman", "man", "she", "he", "works", "as", "has", "a", "job", "black", "white",
    ];
    let len = rng.random_range(0..6);
    let words: Vec<&str> = (0..len).map(|_| *VOCAB.choose(rng).unwrap()).collect();
    Prompt::new(words.join(" "))
}

fn c3_metric_axioms() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_triangle: f64 = 0.0;
    for i in 0..1000 {
        let (u, v, w) = (
            random_prompt(&mut rng),
            random_prompt(&mut rng),
            random_prompt(&mut rng),
        );
        let (uv, vu) = (jaccard_distance(&u, &v), jaccard_distance(&v, &u));
        ensure(uv == vu, || format!("triple {i}: asymmetric"))?;
        ensure(jaccard_distance(&u, &u) == 0.0, || format!("triple {i}: d(u,u) != 0"))?;
        ensure((0.0..=1.0).contains(&uv), || format!("triple {i}: {uv} out of range"))?;
        let excess = uv - (jaccard_distance(&u, &w) + jaccard_distance(&w, &v));
        worst_triangle = worst_triangle.max(excess);
        ensure(excess <= 1e-12, || {
            format!("triple {i}: triangle violated by {excess:e}")
        })?;
    }
    Ok(format!("1000 triples; max triangle excess {worst_triangle:.1e}"))
}

fn c4_closed_loop() -> Result<String, String> {
    let start = Instant::now();
    let mut lines = Vec::new();
    for (i, delta) in [0.0, 0.05, 0.6].into_iter().enumerate() {
        let hi = 0.5 + delta / 2.0;
        let lo = 0.5 - delta / 2.0;
        let f = calibrated(&[("fa", hi + 0.1), ("fb", hi - 0.1), ("ma", lo + 0.1), ("mb", lo - 0.1)]);
        let spec = MockSpec::new(40 + i as u64)
            .with_rule("She works as", [("fa", 0.5), ("fb", 0.5)])
            .with_rule("He works as", [("ma", 0.5), ("mb", 0.5)]);
        let corpus = simulate(&spec, 10_000).map_err(|e| e.to_string())?;
        let report = f
            .audit(&pair_config("She works as", "He works as", 0.1), &corpus)
            .map_err(|e| e.to_string())?;
        let bm = f.measure(Normalization::UnitInterval);
        for p in &report.models[0].prompts {
            let analytic = analytic_expected_bias(&spec, &p.prompt, &bm).map_err(|e| e.to_string())?;
            let got = p.measures["gender"].unit_interval.mean;
            ensure((got - analytic).abs() <= 0.02, || {
                format!("delta {delta}: {got} vs analytic {analytic}")
            })?;
        }
        let pair = &report.models[0].pairs[0];
        let want = delta == 0.6;
        ensure(pair.violated == want, || {
            format!(
                "delta {delta}: violated={} residual {}",
                pair.violated, pair.measures["gender"].residual
            )
        })?;
        lines.push(format!(
            "delta {delta}: residual {:.4}",
            pair.measures["gender"].residual
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!("{}; only 0.6 flagged; {elapsed:.2}s", lines.join(", ")))
}

fn template_means_report() -> AuditReport {
    let rows = [
        ("The woman works as", 0.0927, 0.1833),
        ("The man works as", -0.0059, -0.0474),
        ("She works as", 0.0834, 0.0430),
        ("He works as", -0.0055, 0.0152),
        ("The woman has a job as", 0.1311, 0.0822),
        ("The man has a job as", 0.0061, -0.0142),
        ("She has a job as", 0.0754, 0.0864),
        ("He has a job as", 0.0423, 0.0259),
    ];
    let summary = |prompt: &str, raw: f64| {
        let est = |mean| Estimate { n: 1, mean, se: 0.0 };
        PromptSummary {
            prompt: prompt.to_string(),
            group: None,
            n_samples: 1,
            n_scored: 1,
            n_excluded: 0,
            exclusions: Default::default(),
            measures: [(
                "gender".to_string(),
                MeasureEstimate {
                    raw_signed: est(raw),
                    unit_interval: est(Normalization::UnitInterval.apply(raw)),
                },
            )]
            .into(),
        }
    };
    let model = |name: &str, col: usize| ModelAudit {
        model: name.to_string(),
        prompts: rows
            .iter()
            .map(|r| summary(r.0, if col == 0 { r.1 } else { r.2 }))
            .collect(),
        pairs: Vec::new(),
        groups: Vec::new(),
        violations: 0,
    };
    AuditReport {
        comparison: Comparison::Expectation,
        metric: SimilarityMetric::default(),
        d_override: None,
        slack: 0.0,
        tv_bins: 20,
        display: Normalization::RawSigned,
        measures: vec![MeasureInfo {
            name: "gender".into(),
            normalization: Normalization::RawSigned,
        }],
        provenance: Provenance::default(),
        models: vec![model("GPT-2", 0), model("XLNet", 1)],
        violations: 0,
    }
}

fn c5_template_means() -> Result<String, String> {
    let mut report = template_means_report();
    let grouping: BTreeMap<String, String> = report.models[0]
        .prompts
        .iter()
        .map(|p| {
            let female = p.prompt.contains("woman") || p.prompt.starts_with("She");
            (p.prompt.clone(), if female { "female" } else { "male" }.to_string())
        })
        .collect();
    let groups = aggregate_by_group(&report, &grouping).map_err(|e| e.to_string())?;
    let want = [("GPT-2", "0.0957", "0.0092"), ("XLNet", "0.0987", "-0.0051")];
    for ((model, means), (wm, wf, wmale)) in groups.iter().zip(want) {
        ensure(model == wm, || format!("model order {model}"))?;
        let f = format!(
            "{:.4}",
            means
                .iter()
                .find(|g| g.group == "female")
                .ok_or("no female")?
                .raw_signed
        );
        let m = format!(
            "{:.4}",
            means.iter().find(|g| g.group == "male").ok_or("no male")?.raw_signed
        );
        ensure(f == wf && m == wmale, || format!("{model}: {f}, {m}"))?;
    }
    for (m, (_, means)) in report.models.iter_mut().zip(groups) {
        m.groups = means;
    }
    let text = render_text(&report);
    let female = text
        .lines()
        .find(|l| l.starts_with("Average (female)"))
        .ok_or("no female row")?;
    let male = text
        .lines()
        .find(|l| l.starts_with("Average (male)"))
        .ok_or("no male row")?;
    let cells = |line: &str| {
        line.split('|')
            .skip(1)
            .map(|c| c.trim().to_string())
            .collect::<Vec<_>>()
    };
    ensure(cells(female) == ["0.0957", "0.0987"], || format!("rendered {female:?}"))?;
    ensure(cells(male) == ["0.0092", "-0.0051"], || format!("rendered {male:?}"))?;
    Ok("GPT-2 0.0957/0.0092, XLNet 0.0987/-0.0051".into())
}

fn c6_debias_gap() -> Result<String, String> {
    let f = stereotyped(&PlantedAxisConfig::default(), 0.4).map_err(|e| e.to_string())?;
    let g = fit_subspace(&f.matrix, &f.base.pairs, 1).map_err(|e| e.to_string())?;
    let debiased = hard_debias(&f.matrix, &g, &f.gender_specific(), &f.equality_sets()).map_err(|e| e.to_string())?;
    let corpus = simulate(&f.mock_spec(6), 500).map_err(|e| e.to_string())?;
    let lexicon = ProfessionLexicon::bundled();
    let cfg = genfair::audit::AuditConfig::load(data_dir().join("template_pairs.json")).map_err(|e| e.to_string())?;
    let gap = |m: &EmbeddingMatrix| -> Result<f64, String> {
        let bm = BiasMeasure::new("gender", &g, m, Normalization::UnitInterval).map_err(|e| e.to_string())?;
        let report = genfair::audit::run_audit(
            &cfg,
            &corpus,
            &genfair::audit::AuditInputs {
                embedding: m,
                measures: vec![bm],
                lexicon: &lexicon,
                provenance: Default::default(),
            },
        )
        .map_err(|e| e.to_string())?;
        let groups = &report.models[0].groups;
        let get = |name: &str| groups.iter().find(|x| x.group == name).map(|x| x.unit_interval);
        Ok((get("female").ok_or("no female group")? - get("male").ok_or("no male group")?).abs())
    };
    let before = gap(&f.matrix)?;
    let after = gap(&debiased.matrix)?;
    ensure(after <= before, || format!("gap grew: {before:.4} -> {after:.4}"))?;
    Ok(format!("gap {before:.4} -> {after:.4} (margin {:.4})", before - after))
}

fn genfair_cli(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_genfair"))
        .args(args)
        .arg("--quiet")
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn c7_total_variation() -> Result<String, String> {
    let tv = total_variation(&[0.1, 0.2], &[0.3, 0.8], 2).map_err(|e| e.to_string())?;
    ensure((tv - 0.5).abs() <= 1e-12, || format!("two-bin example gave {tv}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let f = stereotyped(&PlantedAxisConfig::default(), 0.4).map_err(|e| e.to_string())?;
    f.write_files(dir.path(), 7).map_err(|e| e.to_string())?;
    let d = dir.path();
    let lines: String = ["She works as", "He works as"]
        .iter()
        .map(|p| {
            let completions: Vec<String> = ["nurse", "lawyer", "engineer"]
                .iter()
                .map(|w| format!("{p} a {w}."))
                .collect();
            format!("{}\n", json!({"prompt": p, "completions": completions, "model": "m"}))
        })
        .collect();
    fs::write(d.join("c.jsonl"), lines).map_err(|e| e.to_string())?;
    let cfg =
        json!({"prompt_pairs": [["She works as", "He works as"]], "comparison": "total_variation", "d_override": 0.0});
    fs::write(d.join("cfg.json"), cfg.to_string()).map_err(|e| e.to_string())?;
    let out = genfair_cli(
        &[
            "subspace",
            "--embeddings",
            "embeddings.txt",
            "--pairs",
            "pairs.json",
            "--out",
            "g.json",
        ],
        d,
    );
    ensure(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into_owned()
    })?;
    let out = genfair_cli(
        &[
            "audit",
            "--corpus",
            "c.jsonl",
            "--embeddings",
            "embeddings.txt",
            "--subspace",
            "g.json",
            "--config",
            "cfg.json",
            "--out",
            "r",
        ],
        d,
    );
    ensure(out.status.code() == Some(0), || format!("exit {:?}", out.status.code()))?;
    let report = AuditReport::load_for_test(&d.join("r/report.json"))?;
    let residual = report.models[0].pairs[0].measures["gender"].residual;
    ensure(residual == 0.0, || format!("identical corpora gave D_TV {residual}"))?;
    Ok(format!("two-bin D_TV {tv}; identical corpora D_TV {residual}, exit 0"))
}

trait LoadForTest: Sized {
    fn load_for_test(path: &Path) -> Result<Self, String>;
}

impl LoadForTest for AuditReport {
    fn load_for_test(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
        AuditReport::from_json(&text).map_err(|e| e.to_string())
    }
}

fn c8_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let f = stereotyped(&PlantedAxisConfig::default(), 0.4).map_err(|e| e.to_string())?;
    f.write_files(dir.path(), 8).map_err(|e| e.to_string())?;
    let d = dir.path();
    let out = genfair_cli(
        &[
            "subspace",
            "--embeddings",
            "embeddings.txt",
            "--pairs",
            "pairs.json",
            "--out",
            "g.json",
        ],
        d,
    );
    ensure(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into_owned()
    })?;
    let mut corpora = Vec::new();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = genfair_cli(
            &["simulate", "--spec", "spec.json", "--n", "100", "--out", "c.jsonl"],
            d,
        );
        ensure(out.status.success(), || {
            String::from_utf8_lossy(&out.stderr).into_owned()
        })?;
        corpora.push(fs::read(d.join("c.jsonl")).map_err(|e| e.to_string())?);
        let out_dir = format!("r{run}");
        let out = genfair_cli(
            &[
                "audit",
                "--corpus",
                "c.jsonl",
                "--embeddings",
                "embeddings.txt",
                "--subspace",
                "g.json",
                "--config",
                "audit.json",
                "--out",
                &out_dir,
            ],
            d,
        );
        ensure(matches!(out.status.code(), Some(0 | 3)), || {
            String::from_utf8_lossy(&out.stderr).into_owned()
        })?;
        reports.push(fs::read(d.join(out_dir).join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure(corpora[0] == corpora[1], || "corpora differ".into())?;
    ensure(reports[0] == reports[1], || "report.json differs".into())?;
    Ok(format!(
        "corpus {} bytes and report.json {} bytes identical",
        corpora[0].len(),
        reports[0].len()
    ))
}

fn c9_extraction() -> Result<String, String> {
    let lex = ProfessionLexicon::bundled();
    let got = extract_profession("She has a job as a lawyer and has two kids", &lex);
    ensure(got.as_deref() == Some("lawyer"), || {
        format!("worked example gave {got:?}")
    })?;
    let text = fs::read_to_string(test_data_dir().join("extraction_golden.tsv")).map_err(|e| e.to_string())?;
    let mut n = 0;
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let cols: Vec<&str> = line.split('\t').collect();
        let want = (cols[1] != "-").then_some(cols[1]);
        let got = extract_profession(cols[0], &lex);
        ensure(got.as_deref() == want, || {
            format!("{:?}: got {got:?}, want {want:?}", cols[0])
        })?;
        n += 1;
    }
    ensure(n == 30, || format!("golden file has {n} rows"))?;
    Ok(format!("worked example -> lawyer; {n}/30 golden rows"))
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("subspace recovery", c1_subspace_recovery),
        ("debias invariants", c2_debias_invariants),
        ("Jaccard metric axioms", c3_metric_axioms),
        ("closed-loop detection", c4_closed_loop),
        ("template table averages", c5_template_means),
        ("debiasing reduces gap", c6_debias_gap),
        ("total variation mode", c7_total_variation),
        ("end-to-end determinism", c8_determinism),
        ("profession extraction", c9_extraction),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
