//! Markdown summary assembled from the files a run leaves in its output
//! directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dqlids::eval::MetricsReport;

use crate::commands::{METRICS_FILE, REWARD_CSV, SWEEP_SUMMARY, TIMING_CSV};
use crate::config::CONFIG_ECHO;

pub const REPORT_FILE: &str = "report.md";

/// Mean of the first and of the last tenth of `rewards` (at least one
/// episode each). `None` when empty.
pub fn reward_trend(rewards: &[f64]) -> Option<(f64, f64)> {
    if rewards.is_empty() {
        return None;
    }
    let k = (rewards.len() / 10).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some((mean(&rewards[..k]), mean(&rewards[rewards.len() - k..])))
}

/// Column `col` of a headered CSV, parsed as `f64`.
pub fn read_csv_column(path: &Path, col: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let field = line.split(',').nth(col).unwrap_or("");
            field
                .parse()
                .with_context(|| format!("{} row {}: bad number {field:?}", path.display(), i + 2))
        })
        .collect()
}

fn optional(path: PathBuf) -> Option<PathBuf> {
    path.exists().then_some(path)
}

fn metrics_section(s: &mut String, report: &MetricsReport) {
    let a = &report.macro_avg;
    writeln!(s, "## Test metrics\n").unwrap();
    writeln!(s, "| | value |\n|---|---|").unwrap();
    writeln!(s, "| records | {} |", report.total).unwrap();
    writeln!(s, "| overall accuracy | {:.4} |", report.overall_accuracy).unwrap();
    writeln!(s, "| macro precision | {:.4} |", a.precision).unwrap();
    writeln!(s, "| macro recall | {:.4} |", a.recall).unwrap();
    writeln!(s, "| macro F1 | {:.4} |", a.f1).unwrap();
    writeln!(s, "| macro accuracy | {:.4} |", a.accuracy).unwrap();
    writeln!(
        s,
        "\nMacro averages cover the {} classes present in the data.\n",
        a.classes
    )
    .unwrap();

    writeln!(s, "### Per class\n").unwrap();
    writeln!(
        s,
        "| class | support | precision | recall | F1 | accuracy | notes |"
    )
    .unwrap();
    writeln!(s, "|---|---|---|---|---|---|---|").unwrap();
    for m in &report.per_class {
        let mut notes = Vec::new();
        if m.low_support {
            notes.push("low support");
        }
        if m.precision_undefined {
            notes.push("never predicted");
        }
        if m.recall_undefined {
            notes.push("absent");
        }
        writeln!(
            s,
            "| {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {} |",
            m.class,
            m.support,
            m.precision,
            m.recall,
            m.f1,
            m.accuracy,
            notes.join(", ")
        )
        .unwrap();
    }

    writeln!(s, "\n### Confusion matrix (rows predicted, columns true)\n").unwrap();
    let names: Vec<&str> = report.per_class.iter().map(|m| m.class.as_str()).collect();
    writeln!(s, "| | {} |", names.join(" | ")).unwrap();
    writeln!(s, "|---|{}", "---|".repeat(names.len())).unwrap();
    for (p, name) in names.iter().enumerate() {
        let row: Vec<String> = report.confusion.counts[p]
            .iter()
            .map(u64::to_string)
            .collect();
        writeln!(s, "| {name} | {} |", row.join(" | ")).unwrap();
    }
}

fn training_section(s: &mut String, rewards: &[f64], seconds: Option<f64>) {
    writeln!(s, "\n## Training\n").unwrap();
    writeln!(s, "- episodes: {}", rewards.len()).unwrap();
    if let Some((first, last)) = reward_trend(rewards) {
        let k = (rewards.len() / 10).max(1);
        writeln!(s, "- mean reward, first {k} episodes: {first:.1}").unwrap();
        writeln!(s, "- mean reward, last {k} episodes: {last:.1}").unwrap();
    }
    if let Some(t) = seconds {
        writeln!(s, "- training wall-clock: {t:.1} s ({:.2} min)", t / 60.0).unwrap();
    }
}

fn sweep_section(s: &mut String, csv: &str) {
    writeln!(s, "\n## Sweep\n").unwrap();
    let mut lines = csv.lines();
    let Some(header) = lines.next() else { return };
    let cols: Vec<&str> = header.split(',').collect();
    writeln!(s, "| {} |", cols.join(" | ")).unwrap();
    writeln!(s, "|{}", "---|".repeat(cols.len())).unwrap();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.splitn(cols.len(), ',').collect();
        writeln!(s, "| {} |", fields.join(" | ")).unwrap();
    }
}

/// Renders `report.md` from what is present in `out`; `metrics.json` is required.
pub fn render(out: &Path) -> Result<String> {
    let metrics_path = out.join(METRICS_FILE);
    let text = fs::read_to_string(&metrics_path)
        .with_context(|| format!("reading {} (run evaluate first)", metrics_path.display()))?;
    let report: MetricsReport = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", metrics_path.display()))?;

    let mut s = String::from("# Intrusion detection run report\n\n");
    metrics_section(&mut s, &report);
    if let Some(path) = optional(out.join(REWARD_CSV)) {
        let rewards = read_csv_column(&path, 1)?;
        let seconds = match optional(out.join(TIMING_CSV)) {
            Some(t) => Some(read_csv_column(&t, 1)?.iter().sum()),
            None => None,
        };
        training_section(&mut s, &rewards, seconds);
    }
    if let Some(path) = optional(out.join(SWEEP_SUMMARY)) {
        sweep_section(&mut s, &fs::read_to_string(path)?);
    }
    if let Some(path) = optional(out.join(CONFIG_ECHO)) {
        writeln!(
            s,
            "\n## Configuration\n\n```\n{}```",
            fs::read_to_string(path)?
        )
        .unwrap();
    }
    Ok(s)
}

pub fn report(out: &Path) -> Result<PathBuf> {
    let body = render(out)?;
    let path = out.join(REPORT_FILE);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
