use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use splitmap_cli::{load_scenario, output_dir, plot_files, run_config, sweep, Status};

#[derive(Parser)]
#[command(name = "splitmap", version, about = "Build direction frames and splitting maps on model spaces")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: scenario output.dir, then $SPLITMAP_OUT]
        #[arg(long)]
        out: Option<PathBuf>,
        /// `key=value`, e.g. `beta=10` or `sampling.qi_pairs=500`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a scenario once per value of one knob.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Regenerate plots from report.json or sweep.json files.
    Plot {
        #[arg(long = "report", required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
    },
}

fn set_threads(n: Option<usize>) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main_inner(cli: Cli) -> Result<Status> {
    set_threads(cli.threads)?;
    match cli.cmd {
        Cmd::Run { scenario, seed, out, overrides } => {
            let cfg = load_scenario(&scenario, seed, &overrides)?;
            let dir = output_dir(out.as_deref(), Some(&cfg));
            let o = run_config(&cfg, &dir)?;
            match o.summary.epsilon {
                Some(e) => println!("epsilon = {e:.6e}"),
                None => println!("epsilon unavailable"),
            }
            println!("status: {:?}", o.status);
            for p in o.artifacts.frame_json.iter().chain(&o.artifacts.report_json).chain(&o.artifacts.csv).chain(&o.artifacts.svg) {
                println!("wrote {}", p.display());
            }
            println!("log {}", o.artifacts.log.display());
            Ok(o.status)
        }
        Cmd::Sweep { scenario, axis, values, seed, out, overrides } => {
            let mut all = overrides;
            if let Some(s) = seed {
                all.push(format!("seed={s}"));
            }
            let cfg = load_scenario(&scenario, None, &all).ok();
            let dir = output_dir(out.as_deref(), cfg.as_ref());
            let o = sweep(&scenario, &all, &axis, &values, &dir)?;
            for r in &o.rows {
                let eps = r.epsilon.map_or("-".to_string(), |e| format!("{e:.6e}"));
                println!("{axis}={:<10} {:<8} epsilon {eps}{}", r.value, r.status, r.error.as_deref().map(|e| format!("  ({e})")).unwrap_or_default());
            }
            for p in &o.artifacts {
                println!("wrote {}", p.display());
            }
            Ok(o.status)
        }
        Cmd::Plot { reports } => {
            for p in plot_files(&reports)? {
                println!("wrote {}", p.display());
            }
            Ok(Status::Full)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(s) => ExitCode::from(s.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
