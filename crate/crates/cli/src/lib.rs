//! Scenario runner: reads a scenario file, builds the frame and the
//! splitting report, and writes JSON, CSV and SVG artifacts.

pub mod artifacts;
pub mod canon;
pub mod config;
pub mod plot;
pub mod run;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use config::ScenarioConfig;
pub use run::{run_config, RunArtifacts, RunOutcome, RunSummary, Status};
pub use sweep::{plot_files, sweep, SweepOutcome, SweepRow};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SPLITMAP_OUT";

/// Output directory: the explicit flag, else the scenario's own setting,
/// else `$SPLITMAP_OUT`, else `splitmap-out`.
pub fn output_dir(flag: Option<&Path>, cfg: Option<&ScenarioConfig>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("splitmap-out"))
}

/// Loads a scenario with overrides, with `seed` taking precedence.
pub fn load_scenario(path: &Path, seed: Option<u64>, overrides: &[String]) -> anyhow::Result<ScenarioConfig> {
    let mut all = overrides.to_vec();
    if let Some(s) = seed {
        all.push(format!("seed={s}"));
    }
    ScenarioConfig::load(path, &all)
}
