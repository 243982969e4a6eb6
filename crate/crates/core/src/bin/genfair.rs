use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use genfair::audit::{run_audit, AuditConfig, AuditInputs, AuditReport, Provenance};
use genfair::bias::BiasMeasure;
use genfair::corpus::{self, ProfessionLexicon};
use genfair::debias::{hard_debias, EqualitySetList, GenderSpecificLexicon};
use genfair::embedding::{EmbeddingMatrix, LoadOptions};
use genfair::manifest::{file_sha256, sha256_hex, write_atomic, RunManifest};
use genfair::mock::{simulate, MockSpec};
use genfair::subspace::{fit_subspace, DefinitionalPairSet, GenderSubspace};
use genfair::{report, Error};

const EXIT_INTERNAL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "genfair",
    version,
    about = "Audit sentence completers for individual fairness"
)]
struct Cli {
    /// Suppress progress output.
    #[arg(short, long, global = true)]
    quiet: bool,

    /// Worker threads for internal parallelism.
    #[arg(long, global = true, env = "GENFAIR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a gender subspace from definitional pairs.
    Subspace {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Load at most this many embedding rows.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Hard-debias an embedding (neutralize, then equalize).
    Debias {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        subspace: PathBuf,
        /// Gender-specific words, one per line.
        #[arg(long)]
        specific: PathBuf,
        /// Equality pairs as a JSON array of 2-element arrays.
        #[arg(long)]
        equalize: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Generate a corpus from a mock generator spec.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = corpus::DEFAULT_SAMPLES_PER_PROMPT)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit a completion corpus against prompt-pair fairness constraints.
    Audit {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Default subspace for measures that do not name their own.
        #[arg(long)]
        subspace: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.json, report.csv, report.txt.
        #[arg(long, required_unless_present = "validate_only")]
        out: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
        /// Check that inputs load and the audit runs; write nothing.
        #[arg(long)]
        validate_only: bool,
    },
    /// Re-render a JSON report as text or CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

/// Failure classified by exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { EXIT_INPUT } else { EXIT_INTERNAL },
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "error"
    } else {
        "warn"
    }))
    .init();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }

    let started = Instant::now();
    let result = match &cli.command {
        Command::Subspace {
            embeddings,
            pairs,
            k,
            out,
            limit,
        } => cmd_subspace(&cli, embeddings, pairs, *k, out, *limit, started),
        Command::Debias {
            embeddings,
            subspace,
            specific,
            equalize,
            out,
            limit,
        } => cmd_debias(&cli, embeddings, subspace, specific, equalize, out, *limit, started),
        Command::Simulate { spec, n, out } => cmd_simulate(&cli, spec, *n, out, started),
        Command::Audit {
            corpus,
            embeddings,
            subspace,
            config,
            out,
            limit,
            validate_only,
        } => cmd_audit(
            &cli,
            corpus,
            embeddings,
            subspace.as_deref(),
            config,
            out.as_deref(),
            *limit,
            *validate_only,
            started,
        ),
        Command::Report { input, format, out } => cmd_report(input, *format, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", msg.as_ref());
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_manifest(
    command: &str,
    config: serde_json::Value,
    inputs: &[&Path],
    outputs: &[&Path],
    manifest: &Path,
    started: Instant,
) -> Result<(), Failure> {
    let mut checksums = std::collections::BTreeMap::new();
    for p in inputs {
        checksums.insert(p.display().to_string(), file_sha256(p)?);
    }
    let m = RunManifest {
        command: command.to_string(),
        config,
        inputs: checksums,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        tool_version: genfair::VERSION.to_string(),
        duration_ms: started.elapsed().as_millis(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    m.write(manifest)?;
    Ok(())
}

fn load_embeddings(path: &Path, limit: Option<usize>) -> Result<EmbeddingMatrix, Failure> {
    let m = EmbeddingMatrix::load(
        path,
        &LoadOptions {
            limit,
            ..Default::default()
        },
    )?;
    Ok(m)
}

fn cmd_subspace(
    cli: &Cli,
    embeddings: &Path,
    pairs_path: &Path,
    k: usize,
    out: &Path,
    limit: Option<usize>,
    started: Instant,
) -> CmdResult {
    let m = load_embeddings(embeddings, limit)?;
    let pairs = DefinitionalPairSet::load(pairs_path)?;
    let g = fit_subspace(&m, &pairs, k)?;
    let mut text = g.to_json();
    text.push('\n');
    write_atomic(out, text.as_bytes())?;
    say(
        cli,
        format!(
            "fitted k={} from {} of {} pairs; explained variance: {}",
            g.k,
            g.fitted_from,
            pairs.len(),
            g.explained_variance
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    write_manifest(
        "subspace",
        json!({ "k": k, "limit": limit }),
        &[embeddings, pairs_path],
        &[out],
        &manifest_path(out),
        started,
    )?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_debias(
    cli: &Cli,
    embeddings: &Path,
    subspace: &Path,
    specific: &Path,
    equalize: &Path,
    out: &Path,
    limit: Option<usize>,
    started: Instant,
) -> CmdResult {
    let m = load_embeddings(embeddings, limit)?;
    let g = GenderSubspace::load(subspace)?;
    let lex = GenderSpecificLexicon::load(specific)?;
    let sets = EqualitySetList::load(equalize)?;
    let d = hard_debias(&m, &g, &lex, &sets)?;
    write_atomic(out, d.matrix.to_word2vec_text().as_bytes())?;
    say(
        cli,
        format!(
            "neutralized {}, equalized {}, skipped {} (degenerate words {}, equality sets {})",
            d.stats.neutralized,
            d.stats.equalized,
            d.stats.degenerate_words.len() + d.stats.skipped_sets.len(),
            d.stats.degenerate_words.len(),
            d.stats.skipped_sets.len()
        ),
    );
    write_manifest(
        "debias",
        json!({ "limit": limit, "stats": d.stats }),
        &[embeddings, subspace, specific, equalize],
        &[out],
        &manifest_path(out),
        started,
    )?;
    Ok(0)
}

fn cmd_simulate(cli: &Cli, spec_path: &Path, n: usize, out: &Path, started: Instant) -> CmdResult {
    let spec = MockSpec::load(spec_path)?;
    let records = simulate(&spec, n)?;
    write_atomic(out, corpus::corpus_to_jsonl(&records).as_bytes())?;
    say(cli, format!("wrote {} prompts x {n} samples", records.len()));
    write_manifest(
        "simulate",
        json!({ "n": n, "seed": spec.seed }),
        &[spec_path],
        &[out],
        &manifest_path(out),
        started,
    )?;
    Ok(0)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_audit(
    cli: &Cli,
    corpus_path: &Path,
    embeddings: &Path,
    default_subspace: Option<&Path>,
    config_path: &Path,
    out: Option<&Path>,
    limit: Option<usize>,
    validate_only: bool,
    started: Instant,
) -> CmdResult {
    let config_bytes = fs::read(config_path).map_err(|e| Error::Io {
        path: config_path.to_path_buf(),
        source: e,
    })?;
    let cfg = AuditConfig::from_json(&String::from_utf8_lossy(&config_bytes))?;
    let config_dir = config_path.parent().unwrap_or(Path::new("."));

    let records = corpus::load_corpus(corpus_path)?;
    let m = load_embeddings(embeddings, limit)?;

    let mut inputs: Vec<PathBuf> = vec![corpus_path.into(), embeddings.into(), config_path.into()];
    let mut subspaces = Vec::with_capacity(cfg.measures.len());
    for spec in &cfg.measures {
        let path = match (&spec.subspace, default_subspace) {
            (Some(p), _) => resolve(config_dir, p),
            (None, Some(p)) => p.to_path_buf(),
            (None, None) => {
                return Err(Error::Invalid(format!(
                    "measure {:?} names no subspace and --subspace was not given",
                    spec.name
                ))
                .into())
            }
        };
        subspaces.push(GenderSubspace::load(&path)?);
        if !inputs.contains(&path) {
            inputs.push(path);
        }
    }
    let lexicon = match &cfg.professions {
        Some(p) => {
            let path = resolve(config_dir, p);
            let lex = ProfessionLexicon::load(&path)?;
            inputs.push(path);
            lex
        }
        None => ProfessionLexicon::bundled(),
    };
    let measures = cfg
        .measures
        .iter()
        .zip(&subspaces)
        .map(|(spec, g)| BiasMeasure::new(&spec.name, g, &m, spec.normalization))
        .collect::<Result<Vec<_>, _>>()?;

    let provenance = Provenance {
        config_hash: Some(sha256_hex(&config_bytes)),
        embedding_path: Some(embeddings.display().to_string()),
        corpus_path: Some(corpus_path.display().to_string()),
        subspace_path: default_subspace.map(|p| p.display().to_string()),
        tool_version: genfair::VERSION.to_string(),
    };
    let report = run_audit(
        &cfg,
        &records,
        &AuditInputs {
            embedding: &m,
            measures,
            lexicon: &lexicon,
            provenance,
        },
    )?;

    if validate_only {
        say(
            cli,
            format!(
                "valid: {} records, {} models, {} pairs",
                records.len(),
                report.models.len(),
                cfg.prompt_pairs.len()
            ),
        );
        return Ok(0);
    }

    let out = out.expect("clap requires --out without --validate-only");
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let json_path = out.join("report.json");
    let csv_path = out.join("report.csv");
    let text_path = out.join("report.txt");
    let text = report::render_text(&report);
    write_atomic(&json_path, report.to_json().as_bytes())?;
    write_atomic(&csv_path, report::render_csv(&report)?.as_bytes())?;
    write_atomic(&text_path, text.as_bytes())?;
    say(cli, &text);

    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest(
        "audit",
        serde_json::to_value(&cfg).expect("config serializes"),
        &input_refs,
        &[&json_path, &csv_path, &text_path],
        &out.join("manifest.json"),
        started,
    )?;
    Ok(if report.has_violations() { EXIT_VIOLATION } else { 0 })
}

fn cmd_report(input: &Path, format: Format, out: Option<&Path>) -> CmdResult {
    let text = fs::read_to_string(input).map_err(|e| Error::Io {
        path: input.to_path_buf(),
        source: e,
    })?;
    let report = AuditReport::from_json(&text)?;
    let rendered = match format {
        Format::Text => report::render_text(&report),
        Format::Csv => report::render_csv(&report)?,
    };
    match out {
        Some(p) => write_atomic(p, rendered.as_bytes())?,
        None => print!("{rendered}"),
    }
    Ok(0)
}
