//! Human-readable and CSV renderings of an [`AuditReport`].

use std::fmt::Write as _;

use crate::audit::{AuditReport, Comparison};
use crate::error::{Error, Result};

/// Rounds to `places` decimals from the exact binary value, as `{:.N}`
/// formatting does.
pub fn round_decimal(x: f64, places: usize) -> f64 {
    format_decimal(x, places).parse().unwrap_or(x)
}

pub fn format_decimal(x: f64, places: usize) -> String {
    let s = format!("{x:.places$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

fn table(out: &mut String, header: &[String], rows: &[Vec<String>], separators: &[usize]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let rule = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
    let _ = writeln!(out, "{}", line(header));
    let _ = writeln!(out, "{rule}");
    for (i, row) in rows.iter().enumerate() {
        if separators.contains(&i) {
            let _ = writeln!(out, "{rule}");
        }
        let _ = writeln!(out, "{}", line(row));
    }
}

/// Aligned-column tables: one per measure in the per-prompt layout
/// (templates down, models across, group averages last), then the pair
/// checks.
pub fn render_text(report: &AuditReport) -> String {
    let mut out = String::new();
    let comparison = match report.comparison {
        Comparison::Expectation => "expectation".to_string(),
        Comparison::TotalVariation => format!("total_variation ({} bins)", report.tv_bins),
    };
    let _ = writeln!(out, "Comparison: {comparison}");
    match report.d_override {
        Some(d) => {
            let _ = writeln!(out, "Prompt distance: fixed d = {d}");
        }
        None => {
            let _ = writeln!(out, "Prompt distance: {:?}", report.metric.kind);
        }
    }
    let _ = writeln!(out, "Slack: {}", report.slack);
    if let Some(hash) = &report.provenance.config_hash {
        let _ = writeln!(out, "Config: sha256 {hash}");
    }

    for measure in &report.measures {
        let _ = writeln!(
            out,
            "\nBias ({}, {}; fairness checked on {})",
            measure.name, report.display, measure.normalization
        );
        let mut header = vec!["Prefix Template".to_string()];
        header.extend(report.models.iter().map(|m| m.model.clone()));

        let mut prompts: Vec<&str> = Vec::new();
        for m in &report.models {
            for p in &m.prompts {
                if !prompts.contains(&p.prompt.as_str()) {
                    prompts.push(&p.prompt);
                }
            }
        }
        let mut rows: Vec<Vec<String>> = prompts
            .iter()
            .map(|prompt| {
                let mut row = vec![prompt.to_string()];
                for m in &report.models {
                    let cell = m
                        .prompts
                        .iter()
                        .find(|p| p.prompt == *prompt)
                        .map(|p| format_decimal(p.measures[&measure.name].get(report.display).mean, 4))
                        .unwrap_or_default();
                    row.push(cell);
                }
                row
            })
            .collect();

        let mut groups: Vec<&str> = Vec::new();
        for m in &report.models {
            for g in m.groups.iter().filter(|g| g.measure == measure.name) {
                if !groups.contains(&g.group.as_str()) {
                    groups.push(&g.group);
                }
            }
        }
        let first_group_row = rows.len();
        for group in groups {
            let mut row = vec![format!("Average ({group})")];
            for m in &report.models {
                let cell = m
                    .groups
                    .iter()
                    .find(|g| g.measure == measure.name && g.group == group)
                    .map(|g| {
                        let v = match report.display {
                            crate::bias::Normalization::RawSigned => g.raw_signed,
                            crate::bias::Normalization::UnitInterval => g.unit_interval,
                        };
                        format_decimal(v, 4)
                    })
                    .unwrap_or_default();
                row.push(cell);
            }
            rows.push(row);
        }
        let seps = if rows.len() > first_group_row {
            vec![first_group_row]
        } else {
            vec![]
        };
        table(&mut out, &header, &rows, &seps);
    }

    let _ = writeln!(out, "\nPair checks");
    let header: Vec<String> = ["Model", "Prompt u", "Prompt v", "Measure", "d", "Residual", "Violated"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for m in &report.models {
        for p in &m.pairs {
            for (name, pm) in &p.measures {
                rows.push(vec![
                    m.model.clone(),
                    p.u.clone(),
                    p.v.clone(),
                    name.clone(),
                    format_decimal(p.d, 4),
                    format_decimal(pm.residual, 4),
                    if pm.violated { "yes".into() } else { "no".into() },
                ]);
            }
        }
    }
    table(&mut out, &header, &rows, &[]);
    let _ = writeln!(out, "\nViolations: {}", report.violations);
    out
}

/// One row per (model, pair, measure).
pub fn render_csv(report: &AuditReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record([
        "model",
        "u",
        "v",
        "measure",
        "comparison",
        "d",
        "slack",
        "residual",
        "violated",
    ])
    .map_err(csv_err)?;
    let comparison = match report.comparison {
        Comparison::Expectation => "expectation",
        Comparison::TotalVariation => "total_variation",
    };
    for m in &report.models {
        for p in &m.pairs {
            for (name, pm) in &p.measures {
                w.write_record([
                    m.model.as_str(),
                    &p.u,
                    &p.v,
                    name,
                    comparison,
                    &p.d.to_string(),
                    &report.slack.to_string(),
                    &pm.residual.to_string(),
                    if pm.violated { "true" } else { "false" },
                ])
                .map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
