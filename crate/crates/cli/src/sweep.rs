//! Sweeps over one knob, and replotting of saved outputs.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use splitmap_core::par;

use crate::artifacts::{write_atomic, write_csv, write_json};
use crate::canon::SCHEMA_VERSION;
use crate::config::{apply_overrides, parse_value, read_tree, resolve_key, set, ScenarioConfig};
use crate::plot;
use crate::run::{report_plots, run_config, Status};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    /// Numeric knob value, when the value is a number.
    pub x: Option<f64>,
    /// `full`, `partial` or `failed`.
    pub status: String,
    pub epsilon: Option<f64>,
    pub gram_deviation: Option<f64>,
    pub qi_max_deviation: Option<f64>,
    pub levels: Option<usize>,
    pub dir: String,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub schema_version: u32,
    pub kind: String,
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub status: Status,
    pub rows: Vec<SweepRow>,
    pub artifacts: Vec<PathBuf>,
}

fn dir_name(axis: &str, value: &str) -> String {
    let clean = |s: &str| s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect::<String>();
    format!("{}={}", clean(axis), clean(value))
}

fn order(a: &SweepRow, b: &SweepRow) -> Ordering {
    match (a.x, b.x) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.value.cmp(&b.value),
    }
}

/// Runs the scenario once per value of `axis`, each into its own
/// subdirectory of `out`. A failing value is recorded and the sweep goes on.
pub fn sweep(scenario: &Path, overrides: &[String], axis: &str, values: &[String], out: &Path) -> Result<SweepOutcome> {
    let values: Vec<String> = values.iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    resolve_key(axis)?;
    let mut base = read_tree(scenario)?;
    apply_overrides(&mut base, overrides)?;
    let run_one = |value: &String| -> SweepRow {
        let name = dir_name(axis, value);
        let parsed = parse_value(value);
        let mut row = SweepRow {
            value: value.clone(),
            x: parsed.as_float().or_else(|| parsed.as_integer().map(|i| i as f64)),
            status: "failed".into(),
            epsilon: None,
            gram_deviation: None,
            qi_max_deviation: None,
            levels: None,
            dir: name.clone(),
            error: None,
        };
        let mut tree = base.clone();
        let result = set(&mut tree, axis, parsed)
            .and_then(|_| ScenarioConfig::from_tree(tree))
            .and_then(|cfg| run_config(&cfg, &out.join(&name)));
        match result {
            Ok(o) => {
                row.status = if o.status == Status::Full { "full" } else { "partial" }.into();
                row.epsilon = o.summary.epsilon;
                row.gram_deviation = o.summary.gram_deviation;
                row.qi_max_deviation = o.summary.qi_max_deviation;
                row.levels = Some(o.summary.levels);
            }
            Err(e) => row.error = Some(format!("{e:#}")),
        }
        row
    };
    let mut rows = par::map(values.len(), |i| run_one(&values[i]));
    rows.sort_by(order);

    let file = SweepFile { schema_version: SCHEMA_VERSION, kind: "sweep".into(), axis: axis.into(), rows };
    let artifacts = vec![out.join("sweep.json"), out.join("sweep.csv"), out.join("sweep.svg")];
    write_json(&artifacts[0], &file)?;
    write_csv(&artifacts[1], &file.rows)?;
    write_atomic(&artifacts[2], sweep_plot(&file).as_bytes())?;
    let status = if file.rows.iter().all(|r| r.status == "full") { Status::Full } else { Status::Partial };
    Ok(SweepOutcome { status, rows: file.rows, artifacts })
}

fn sweep_plot(f: &SweepFile) -> String {
    let pts: Vec<_> = f.rows.iter().filter_map(|r| r.x.map(|x| (x, r.epsilon, r.status != "full"))).collect();
    plot::line(&format!("epsilon vs {}", f.axis), &f.axis, "epsilon", &pts)
}

#[derive(Deserialize)]
struct QiView {
    histogram: HistView,
}

#[derive(Deserialize)]
struct HistView {
    lo: f64,
    hi: f64,
    counts: Vec<usize>,
}

#[derive(Deserialize)]
struct ReportView {
    gram_distance: Vec<Vec<f64>>,
    gram_harmonic: Option<Vec<Vec<f64>>>,
    quasi_isometry: Option<QiView>,
}

#[derive(Deserialize)]
struct ReportFileView {
    summary: SummaryView,
    report: Option<ReportView>,
}

#[derive(Deserialize)]
struct SummaryView {
    partial: bool,
}

/// Regenerates plots from saved `report.json` or `sweep.json` files. Plots
/// go next to each input, prefixed by its file stem.
pub fn plot_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if paths.is_empty() {
        bail!("no report files given");
    }
    let mut out = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
        let kind = v.get("kind").and_then(|k| k.as_str()).unwrap_or_default().to_string();
        match kind.as_str() {
            "sweep" => {
                let f: SweepFile = serde_json::from_value(v)?;
                let p = dir.join(format!("{stem}.svg"));
                write_atomic(&p, sweep_plot(&f).as_bytes())?;
                out.push(p);
            }
            "splitting-report" => {
                let f: ReportFileView = serde_json::from_value(v).with_context(|| format!("reading {}", path.display()))?;
                let r = f.report.ok_or_else(|| anyhow!("{} has no report to plot", path.display()))?;
                let h = r.quasi_isometry.as_ref().map(|q| (q.histogram.lo, q.histogram.hi, q.histogram.counts.as_slice()));
                out.extend(report_plots(
                    &r.gram_distance,
                    r.gram_harmonic.as_deref(),
                    h,
                    f.summary.partial,
                    dir,
                    &format!("{stem}."),
                )?);
            }
            _ => bail!("{}: not a report or sweep file (kind `{kind}`)", path.display()),
        }
    }
    Ok(out)
}
