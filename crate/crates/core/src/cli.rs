//! Command-line front end.
//!
//! Exit statuses: `0` success (or `Converged`), `1` input error, `2` `Timeout`
//! or failed verification, `3` `Collision`.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::fwlp::{self, SolveStatus, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::log::{parse_log, write_log, LogError};
use crate::plot::render_svg;
use crate::scenario::{parse_beacons, parse_overrides, parse_scenario, ConfigError};
use crate::sim::{self, Outcome, Scenario, TrajectoryLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_TIMEOUT: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_COLLISION: i32 = 3;

/// Upper bound on grid points along one axis of the verification search.
const GRID_MAX_AXIS: f64 = 10_000.0;
const GRID_RESOLUTION: f64 = 1e-3;
/// Largest accepted distance between the solver and grid minimisers.
pub const VERIFY_GRID_LIMIT: f64 = 2e-3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error("{label}: {source}")]
    Model { label: String, source: crate::Error },
    #[error("plot: {0}")]
    Plot(String),
}

impl CliError {
    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fw-unicycle", version, about = "Bearing-only guidance of a unicycle to the Fermat-Weber point")]
pub struct Cli {
    /// Reserved; currently unused (all runs are deterministic).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write its trajectory CSV.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Log every n-th step (overrides the scenario's `sim.decimate`).
        #[arg(long)]
        decimate: Option<usize>,
    },
    /// Run a base scenario under a list of overrides.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        overrides: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Solve for the Fermat-Weber point and cross-check it on a grid.
    Verify {
        /// Scenario or beacon-list file.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Render a trajectory CSV as an SVG figure.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    parse_scenario(&read(path)?).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

fn save_log(log: &TrajectoryLog, path: &Path) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_log(log, BufWriter::new(file)).map_err(|e| CliError::io(path, e))
}

pub fn outcome_status(outcome: &Outcome) -> i32 {
    match outcome {
        Outcome::Converged { .. } => EXIT_OK,
        Outcome::Timeout => EXIT_TIMEOUT,
        Outcome::Collision { .. } => EXIT_COLLISION,
    }
}

pub fn cmd_run(scenario_path: &Path, out: &Path, decimate: Option<usize>) -> Result<Outcome, CliError> {
    let mut scenario = load_scenario(scenario_path)?;
    if let Some(d) = decimate {
        scenario.decimate = d;
    }
    let log = sim::run(&scenario).map_err(|source| CliError::Model {
        label: scenario.label.clone(),
        source,
    })?;
    save_log(&log, out)?;
    Ok(log.outcome)
}

/// One row of the sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub result: Result<(Outcome, f64, f64), String>,
}

fn file_stem(index: usize, label: &str) -> String {
    let clean: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:03}_{clean}")
}

pub fn cmd_sweep(scenario_path: &Path, overrides_path: &Path, out_dir: &Path) -> Result<Vec<SweepRow>, CliError> {
    let base = load_scenario(scenario_path)?;
    let variations = parse_overrides(&read(overrides_path)?, &base).map_err(|source| CliError::Config {
        path: overrides_path.to_path_buf(),
        source,
    })?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let scenarios: Vec<Result<Scenario, String>> = variations
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Ok(v) => {
                let mut s = v.apply(&base);
                if v.label.is_none() {
                    s.label = format!("{}-{i}", base.label);
                }
                Ok(s)
            }
            Err(e) => Err(format!("{}: {e}", overrides_path.display())),
        })
        .collect();
    let runnable: Vec<Scenario> = scenarios.iter().filter_map(|s| s.as_ref().ok().cloned()).collect();
    let mut logs = sim::run_batch(&runnable).into_iter();

    let mut rows = Vec::with_capacity(scenarios.len());
    for (i, s) in scenarios.iter().enumerate() {
        let row = match s {
            Err(e) => SweepRow {
                label: format!("{}-{i}", base.label),
                result: Err(e.clone()),
            },
            Ok(s) => {
                let result = match logs.next().expect("one log per runnable scenario") {
                    Ok(log) => {
                        save_log(&log, &out_dir.join(format!("{}.csv", file_stem(i, &s.label))))?;
                        Ok((log.outcome, log.final_error(), log.min_distance()))
                    }
                    Err(e) => Err(e.to_string()),
                };
                SweepRow {
                    label: s.label.clone(),
                    result,
                }
            }
        };
        rows.push(row);
    }

    let summary_path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary_path).map_err(|e| CliError::io(&summary_path, e.into()))?;
    let to_io = |e: csv::Error| CliError::io(&summary_path, e.into());
    w.write_record(["label", "outcome", "convergence_time", "final_error", "min_distance"])
        .map_err(to_io)?;
    for row in &rows {
        match &row.result {
            Ok((outcome, err, dist)) => {
                let tc = match outcome {
                    Outcome::Converged { t } => format!("{t:?}"),
                    _ => String::new(),
                };
                w.write_record([&row.label, outcome.name(), &tc, &format!("{err:?}"), &format!("{dist:?}")])
                    .map_err(to_io)?;
            }
            Err(_) => w.write_record([row.label.as_str(), "Error", "", "", ""]).map_err(to_io)?,
        }
    }
    w.flush().map_err(|e| CliError::io(&summary_path, e))?;
    Ok(rows)
}

/// Result of `verify`, printed by [`VerifyReport::print`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub existence: Vec<bool>,
    pub solution: fwlp::FwSolution,
    pub grid: fwlp::GridMinimum,
    pub discrepancy: f64,
    pub threshold: f64,
    pub tol: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.solution.status != SolveStatus::MaxIterations
            && self.solution.residual <= self.tol
            && self.discrepancy <= self.threshold
    }

    pub fn print(&self, mut out: impl Write) -> io::Result<()> {
        let flags: Vec<String> = self.existence.iter().map(|b| b.to_string()).collect();
        writeln!(out, "existence: [{}]", flags.join(", "))?;
        let s = &self.solution;
        match s.beacon {
            Some(k) => writeln!(out, "status: {:?} (beacon {k})", s.status)?,
            None => writeln!(out, "status: {:?}", s.status)?,
        }
        writeln!(out, "fw_point: ({:?}, {:?})", s.point.x, s.point.y)?;
        writeln!(out, "iterations: {}", s.iterations)?;
        writeln!(out, "residual: {:e} (tol {:e})", s.residual, self.tol)?;
        writeln!(
            out,
            "grid: ({:?}, {:?}) at resolution {:e}",
            self.grid.point.x, self.grid.point.y, self.grid.resolution
        )?;
        writeln!(out, "grid discrepancy: {:e} (limit {:e})", self.discrepancy, self.threshold)?;
        writeln!(out, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

pub fn cmd_verify(path: &Path, tol: f64) -> Result<VerifyReport, CliError> {
    let beacons = parse_beacons(&read(path)?).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })?;
    let solution = fwlp::weiszfeld(&beacons, tol, DEFAULT_MAX_ITER);
    let (lo, hi) = beacons.bounding_box();
    let extent = (hi.x - lo.x).max(hi.y - lo.y) * 1.5;
    let resolution = GRID_RESOLUTION.max(extent / GRID_MAX_AXIS);
    let grid = fwlp::grid_minimizer(&beacons, resolution, 0.5);
    Ok(VerifyReport {
        existence: fwlp::existence_check(&beacons),
        solution,
        discrepancy: solution.point.distance(grid.point),
        threshold: VERIFY_GRID_LIMIT.max(2.0 * resolution),
        grid,
        tol,
    })
}

pub fn cmd_plot(csv: &Path, out: &Path) -> Result<(), CliError> {
    let log = parse_log(&read(csv)?).map_err(|source| CliError::Log {
        path: csv.to_path_buf(),
        source,
    })?;
    let svg = render_svg(&log).map_err(CliError::Plot)?;
    fs::write(out, svg).map_err(|e| CliError::io(out, e))
}

/// Runs a parsed command line and returns the process exit status.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            decimate,
        } => cmd_run(&scenario, &out, decimate).map(|outcome| {
            println!("{}", outcome_line(&outcome));
            outcome_status(&outcome)
        }),
        Command::Sweep {
            scenario,
            overrides,
            out_dir,
        } => cmd_sweep(&scenario, &overrides, &out_dir).map(|rows| {
            let mut status = EXIT_OK;
            for row in &rows {
                match &row.result {
                    Ok((outcome, ..)) => println!("{}: {}", row.label, outcome_line(outcome)),
                    Err(e) => {
                        eprintln!("error: {}: {e}", row.label);
                        status = EXIT_INPUT;
                    }
                }
            }
            status
        }),
        Command::Verify { scenario, tol } => cmd_verify(&scenario, tol).map(|report| {
            report.print(io::stdout().lock()).ok();
            if report.passed() {
                EXIT_OK
            } else {
                EXIT_VERIFY_FAILED
            }
        }),
        Command::Plot { csv, out } => cmd_plot(&csv, &out).map(|()| EXIT_OK),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_INPUT
    })
}

fn outcome_line(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Converged { t } | Outcome::Collision { t } => format!("{} at t = {t:.2} s", outcome.name()),
        Outcome::Timeout => "Timeout".to_string(),
    }
}
