//! One scenario: build, frame, splitting report, artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use splitmap_core::direction::{
    find_direction_points, FrameRecord, ProjectionRow, ResidualDiameter, StratifiedDefect,
};
use splitmap_core::splitting::{splitting_report, SplittingReport};
use splitmap_core::{Manifold, Point};

use crate::artifacts::{write_atomic, write_csv, write_json};
use crate::canon::SCHEMA_VERSION;
use crate::config::{Format, ScenarioConfig};
use crate::plot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Full,
    Partial,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Full => 0,
            Status::Partial => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub dim: usize,
    pub beta: f64,
    pub seed: u64,
    pub levels: usize,
    pub frame_partial: bool,
    pub collapse_level: Option<usize>,
    pub min_search_ratio: Option<f64>,
    pub epsilon: Option<f64>,
    pub gradient_sup_max: Option<f64>,
    /// `max |G_ij - δ_ij|` of the harmonic Gram matrix.
    pub gram_deviation: Option<f64>,
    pub qi_max_deviation: Option<f64>,
    pub report_errors: usize,
    pub partial: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub frame_json: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub csv: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
    pub log: PathBuf,
    pub config_echo: PathBuf,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub summary: RunSummary,
    pub report: Option<SplittingReport>,
    pub artifacts: RunArtifacts,
}

#[derive(Serialize)]
struct FrameFile<'a> {
    schema_version: u32,
    kind: &'static str,
    record: &'a FrameRecord,
    stratified: &'a [StratifiedDefect],
    projection: &'a [ProjectionRow],
    residual: Option<&'a ResidualDiameter>,
    errors: &'a [String],
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    kind: &'static str,
    config: &'a ScenarioConfig,
    summary: &'a RunSummary,
    report: Option<&'a SplittingReport>,
    error: Option<String>,
}

#[derive(Serialize)]
struct LevelRow {
    index: usize,
    distance: f64,
    r_q: f64,
    log10_gamma: f64,
    search_ratio: Option<f64>,
    search_floor: Option<f64>,
    meets_floor: Option<bool>,
    model_method: String,
    model_skipped: String,
    net_epsilon: f64,
    sample_cells: usize,
    good_cells: usize,
}

#[derive(Serialize)]
struct GramRow {
    i: usize,
    j: usize,
    distance: f64,
    harmonic: Option<f64>,
}

#[derive(Serialize)]
struct ToponogovRow {
    index: usize,
    s: f64,
    samples: usize,
    dropped: usize,
    cosine_mean: f64,
    cosine_se: f64,
    quotient_mean: f64,
    quotient_se: f64,
    leading_term: f64,
}

#[derive(Serialize)]
struct BinRow {
    lo: f64,
    hi: f64,
    count: usize,
}

struct Log {
    text: String,
    start: Instant,
}

impl Log {
    fn new() -> Self {
        Log { text: String::new(), start: Instant::now() }
    }

    fn line(&mut self, msg: impl AsRef<str>) {
        let _ = writeln!(self.text, "[{:>8.2}s] {}", self.start.elapsed().as_secs_f64(), msg.as_ref());
    }
}

fn gram_deviation(g: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

/// Runs a scenario and writes its artifacts into `dir`.
///
/// Errors mean nothing usable was produced. A frame or report that is
/// incomplete still writes artifacts and returns [`Status::Partial`].
pub fn run_config(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut log = Log::new();
    let m = Manifold::build(&cfg.manifold, cfg.seed).context("building the manifold")?;
    log.line(format!("built {:?} manifold, dim {}", cfg.manifold.kind, m.dim()));
    let c = &cfg.construction;
    let p = c.origin.as_deref().map(Point::new).unwrap_or_else(|| m.center());
    let frame = find_direction_points(&m, &p, c.radius, &c.frame, cfg.seed).context("constructing the frame")?;
    log.line(format!("frame: {} levels, partial {}", frame.levels().len(), frame.partial()));

    let mut frame_errors = Vec::new();
    let mut stratified = Vec::new();
    for k in 1..=frame.levels().len() {
        match frame.stratified_defect_stats(k, c.stratified_pairs, cfg.seed) {
            Ok(s) => stratified.push(s),
            Err(e) => frame_errors.push(format!("stratified defect k={k}: {e}")),
        }
    }
    log.line("stratified defects done");
    let projection = frame.projection_diagnostics();
    log.line("projection diagnostics done");
    let residual = match frame.residual_diameter() {
        Ok(r) => Some(r),
        Err(e) => {
            frame_errors.push(format!("residual diameter: {e}"));
            None
        }
    };
    log.line("frame diagnostics done");

    let (report, report_error) = if frame.levels().is_empty() {
        (None, Some("no direction points were constructed".to_string()))
    } else {
        match splitting_report(&m, &frame.anchors(), &cfg.sampling, cfg.seed) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    log.line(match (&report, &report_error) {
        (Some(r), _) => format!("report: epsilon {:?}, partial {}", r.epsilon, r.partial),
        (_, Some(e)) => format!("report failed: {e}"),
        _ => unreachable!(),
    });
    for e in report.iter().flat_map(|r| &r.errors) {
        log.line(format!("report error: {e}"));
    }

    let record = frame.record();
    let partial = frame.partial() || report.as_ref().map_or(true, |r| r.partial);
    let summary = RunSummary {
        dim: m.dim(),
        beta: c.frame.beta,
        seed: cfg.seed,
        levels: record.levels.len(),
        frame_partial: frame.partial(),
        collapse_level: record.collapse.as_ref().map(|c| c.level),
        min_search_ratio: record.levels.iter().filter_map(|l| l.search.as_ref()).map(|s| s.ratio).reduce(f64::min),
        epsilon: report.as_ref().and_then(|r| r.epsilon),
        gradient_sup_max: report.as_ref().and_then(|r| r.gradient_sup.as_ref()).and_then(|g| g.iter().copied().reduce(f64::max)),
        gram_deviation: report.as_ref().and_then(|r| r.gram_harmonic.as_deref()).map(gram_deviation),
        qi_max_deviation: report.as_ref().and_then(|r| r.quasi_isometry.as_ref()).map(|q| q.max_deviation),
        report_errors: report.as_ref().map_or(1, |r| r.errors.len()),
        partial,
    };

    let out = &cfg.output;
    let mut a = RunArtifacts { dir: dir.to_path_buf(), log: dir.join("run.log"), config_echo: dir.join("config.toml"), ..Default::default() };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&a.config_echo, cfg.echo()?.as_bytes())?;

    if out.wants(Format::Json) {
        let f = dir.join("frame.json");
        write_json(
            &f,
            &FrameFile {
                schema_version: SCHEMA_VERSION,
                kind: "direction-frame",
                record: &record,
                stratified: &stratified,
                projection: &projection,
                residual: residual.as_ref(),
                errors: &frame_errors,
            },
        )?;
        a.frame_json = Some(f);
        let r = dir.join("report.json");
        write_json(
            &r,
            &ReportFile {
                schema_version: SCHEMA_VERSION,
                kind: "splitting-report",
                config: cfg,
                summary: &summary,
                report: report.as_ref(),
                error: report_error.clone(),
            },
        )?;
        a.report_json = Some(r);
    }

    if out.wants(Format::Csv) {
        let path = dir.join("summary.csv");
        write_csv(&path, std::slice::from_ref(&summary))?;
        a.csv.push(path);
        let rows: Vec<LevelRow> = record
            .levels
            .iter()
            .map(|l| LevelRow {
                index: l.index,
                distance: l.distance,
                r_q: l.r_q,
                log10_gamma: l.log10_gamma,
                search_ratio: l.search.as_ref().map(|s| s.ratio),
                search_floor: l.search.as_ref().map(|s| s.floor),
                meets_floor: l.search.as_ref().map(|s| s.meets_floor),
                model_method: l.model.method.map(|m| format!("{m:?}").to_lowercase()).unwrap_or_default(),
                model_skipped: l.model.skipped.clone().unwrap_or_default(),
                net_epsilon: l.net.epsilon,
                sample_cells: l.net.sample_cells,
                good_cells: l.net.good_cells,
            })
            .collect();
        let path = dir.join("levels.csv");
        write_csv(&path, &rows)?;
        a.csv.push(path);
        if let Some(r) = &report {
            let path = dir.join("gram.csv");
            write_csv(&path, &gram_rows(r))?;
            a.csv.push(path);
            let rows: Vec<ToponogovRow> = r
                .toponogov
                .iter()
                .flat_map(|t| {
                    t.steps.iter().map(|s| ToponogovRow {
                        index: t.index,
                        s: s.s,
                        samples: s.samples,
                        dropped: s.dropped,
                        cosine_mean: s.cosine.mean,
                        cosine_se: s.cosine.se,
                        quotient_mean: s.quotient.mean,
                        quotient_se: s.quotient.se,
                        leading_term: s.leading_term,
                    })
                })
                .collect();
            let path = dir.join("toponogov.csv");
            write_csv(&path, &rows)?;
            a.csv.push(path);
            if let Some(q) = &r.quasi_isometry {
                let path = dir.join("qi_histogram.csv");
                write_csv(&path, &bin_rows(q.histogram.lo, q.histogram.hi, &q.histogram.counts))?;
                a.csv.push(path);
            }
        }
    }

    if out.wants(Format::Svg) {
        if let Some(r) = &report {
            let h = r.quasi_isometry.as_ref().map(|q| (q.histogram.lo, q.histogram.hi, q.histogram.counts.as_slice()));
            a.svg.extend(report_plots(&r.gram_distance, r.gram_harmonic.as_deref(), h, partial, dir, "")?);
        }
    }

    let status = if partial { Status::Partial } else { Status::Full };
    log.line(format!("status {status:?}"));
    write_atomic(&a.log, log.text.as_bytes())?;
    Ok(RunOutcome { status, summary, report, artifacts: a })
}

fn gram_rows(r: &SplittingReport) -> Vec<GramRow> {
    let n = r.gram_distance.len();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            rows.push(GramRow {
                i,
                j,
                distance: r.gram_distance[i][j],
                harmonic: r.gram_harmonic.as_ref().map(|g| g[i][j]),
            });
        }
    }
    rows
}

fn bin_rows(lo: f64, hi: f64, counts: &[usize]) -> Vec<BinRow> {
    let k = counts.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(b, &count)| BinRow { lo: lo + (hi - lo) * b as f64 / k, hi: lo + (hi - lo) * (b + 1) as f64 / k, count })
        .collect()
}

/// Gram heat map and quasi-isometry ratio histogram for one report.
pub fn report_plots(
    gram_distance: &[Vec<f64>],
    gram_harmonic: Option<&[Vec<f64>]>,
    histogram: Option<(f64, f64, &[usize])>,
    partial: bool,
    dir: &Path,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let (g, which) = match gram_harmonic {
        Some(g) => (g, "harmonic"),
        None => (gram_distance, "distance"),
    };
    let path = dir.join(format!("{prefix}gram.svg"));
    write_atomic(&path, plot::heat_map(&format!("Gram matrix ({which} maps)"), g, partial).as_bytes())?;
    out.push(path);
    if let Some((lo, hi, counts)) = histogram {
        let path = dir.join(format!("{prefix}qi_histogram.svg"));
        let svg = plot::histogram("distance ratio |Psi(x)-Psi(y)| / d(x,y)", "ratio", lo, hi, counts, partial);
        write_atomic(&path, svg.as_bytes())?;
        out.push(path);
    }
    Ok(out)
}
