//! Command-line front end: scenario runs, plots and the verification battery.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 when a
//! run stops on a numerical error or a check fails.

pub mod config;
pub mod output;
pub mod plot;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::dynamics::simulate_with;
use crate::verify::{run_all, Thresholds, VerifyConfig};
use config::ScenarioConfig;
use plot::PlotKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lpfsi", version, about = "Body-vortex dynamics in a 2D ideal fluid, with structural checks")]
pub struct Cli {
    /// Worker threads for independent scenarios and checks.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenarios. One config writes into the output directory; several
    /// write into one subdirectory each, named after the config file.
    Run {
        #[arg(required = true, value_name = "CONFIG")]
        configs: Vec<PathBuf>,
        #[arg(short, long, value_name = "DIR")]
        output: PathBuf,
    },
    /// Draw a trajectory.csv as a standalone SVG.
    Plot {
        #[arg(value_name = "CSV")]
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Run the check battery; prints a JSON report.
    Verify {
        /// JSON thresholds; unspecified keys keep their defaults.
        #[arg(long, value_name = "FILE")]
        thresholds: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Panels of the body in every check.
        #[arg(long, default_value_t = 128)]
        panels: usize,
    },
}

/// Parses `args` (program name first) and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: --jobs: {e}");
            return EXIT_USAGE;
        }
    };
    pool.install(|| match cli.command {
        Command::Run { configs, output } => run(&configs, &output),
        Command::Plot { csv, kind, output } => plot_file(&csv, kind, &output),
        Command::Verify { thresholds, output, panels } => verify(thresholds.as_deref(), output.as_deref(), panels),
    })
}

fn load_config(path: &Path) -> Result<ScenarioConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ScenarioConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Output directory of each config.
fn targets(configs: &[PathBuf], output: &Path) -> Result<Vec<PathBuf>, String> {
    if configs.len() == 1 {
        return Ok(vec![output.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = Vec::new();
    for c in configs {
        let stem = c.file_stem().ok_or_else(|| format!("{}: no file name", c.display()))?;
        let d = output.join(stem);
        if dirs.contains(&d) {
            return Err(format!("two configs share the name {}", stem.to_string_lossy()));
        }
        dirs.push(d);
    }
    Ok(dirs)
}

/// Runs one scenario into `dir`; partial outputs are kept on failure.
pub fn run_scenario(config: &ScenarioConfig, dir: &Path) -> i32 {
    if let Err(e) = fs::create_dir_all(dir) {
        eprintln!("error: {}: {e}", dir.display());
        return EXIT_USAGE;
    }
    let start = Instant::now();
    let n_vortices = config.vortex_state().len();
    let mut observe = |state: &crate::fields::LPState, _: &crate::dynamics::Sample, row: usize| -> crate::Result<()> {
        match &config.fields {
            Some(g) if row.is_multiple_of(g.every) => output::write_fields(dir, g, state, config.n_panels).map(|_| ()),
            _ => Ok(()),
        }
    };
    let (record, error) = match simulate_with(config, &mut observe) {
        Ok(r) => (r, None),
        Err(a) => (a.record, Some((a.error, a.time))),
    };
    let written = output::write_trajectory(dir, &record, n_vortices).and_then(|_| {
        output::write_meta(
            dir,
            &output::RunSummary {
                config,
                wall_time: start.elapsed().as_secs_f64(),
                rows: record.samples.len(),
                error: error.as_ref().map(|(e, t)| (e, *t)),
            },
        )
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    match error {
        Some((e, t)) => {
            eprintln!("{}: stopped at t = {t}: {e}", dir.display());
            EXIT_NUMERICAL
        }
        None => EXIT_OK,
    }
}

fn run(configs: &[PathBuf], output: &Path) -> i32 {
    let loaded: Vec<Result<ScenarioConfig, String>> = configs.iter().map(|p| load_config(p)).collect();
    let mut bad = false;
    for e in loaded.iter().filter_map(|r| r.as_ref().err()) {
        eprintln!("error: {e}");
        bad = true;
    }
    if bad {
        return EXIT_USAGE;
    }
    let dirs = match targets(configs, output) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let jobs: Vec<(ScenarioConfig, PathBuf)> = loaded.into_iter().map(|r| r.expect("errors handled")).zip(dirs).collect();
    let codes: Vec<i32> = jobs.par_iter().map(|(c, d)| run_scenario(c, d)).collect();
    codes.into_iter().max().unwrap_or(EXIT_OK)
}

fn plot_file(csv: &Path, kind: PlotKind, output: &Path) -> i32 {
    let text = match fs::read_to_string(csv) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", csv.display());
            return EXIT_USAGE;
        }
    };
    let svg = plot::Table::parse(&text).and_then(|t| plot::plot(&t, kind));
    match svg {
        Ok(svg) => match fs::write(output, svg) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {}: {e}", output.display());
                EXIT_USAGE
            }
        },
        Err(e) => {
            eprintln!("error: {}: {e}", csv.display());
            EXIT_USAGE
        }
    }
}

fn verify(thresholds: Option<&Path>, output: Option<&Path>, panels: usize) -> i32 {
    let thresholds = match thresholds {
        None => Thresholds::default(),
        Some(p) => match fs::read_to_string(p).map_err(|e| e.to_string()).and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string())) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return EXIT_USAGE;
            }
        },
    };
    if panels < 16 {
        eprintln!("error: --panels: at least 16 panels");
        return EXIT_USAGE;
    }
    let reports = run_all(&VerifyConfig { thresholds, n_panels: panels });
    for r in &reports {
        let status = if r.passed { "PASS" } else { "FAIL" };
        eprintln!("{status} {}{}", r.name, if r.failures.is_empty() { String::new() } else { format!(": {}", r.failures.join("; ")) });
    }
    let all_passed = reports.iter().all(|r| r.passed);
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "note": "vertical deformations relabel vortex material positions; the fluid diffeomorphism itself is not stored",
        "passed": all_passed,
        "checks": reports,
    });
    let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
    let written = match output {
        Some(p) => fs::write(p, &text).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    if all_passed {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}
