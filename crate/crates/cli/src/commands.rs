//! The four subcommands as library functions, so tests can drive them
//! without spawning processes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use covert_uav::psca::{psca_solve, PenaltySchedule, SolveReport};
use covert_uav::scenario::db_to_linear;
use covert_uav::shaf::{build_initial_iterate, shaf_plan};
use covert_uav::validation::{bounds_suite, detection_suite, outage_suite, Check};
use covert_uav::{Error, Result, Scenario};

use crate::artifacts::{
    iteration_rows, schedule_rows, trajectory_rows, write_csv, write_summary, RunArtifacts, RunError, Summary, ITERATIONS,
    SCHEDULE, SUMMARY, TRAJECTORY,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Parse(_) | Error::Validation(_) | Error::Precondition(_) => EXIT_VALIDATION,
        Error::CovertInfeasible { .. } | Error::InsufficientTime { .. } => EXIT_INFEASIBLE,
        Error::Solver { .. } | Error::Rounding { .. } | Error::Degenerate(_) => EXIT_SOLVER,
    }
}

/// Stable machine-readable name of an error variant.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Io(_) => "io",
        Error::Parse(_) => "parse",
        Error::Validation(_) => "validation",
        Error::Precondition(_) => "precondition",
        Error::CovertInfeasible { .. } => "covert_infeasible",
        Error::InsufficientTime { .. } => "insufficient_time",
        Error::Solver { .. } => "solver",
        Error::Rounding { .. } => "rounding",
        Error::Degenerate(_) => "degenerate",
    }
}

fn run_error(e: &Error) -> RunError {
    RunError { kind: error_kind(e).to_owned(), message: e.to_string(), exit_code: exit_code(e) }
}

/// A scenario file's parsed contents and the hash of its bytes.
pub fn load_scenario(path: &Path) -> Result<(Scenario, String)> {
    let bytes = std::fs::read(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))))?;
    Ok((Scenario::from_json(text)?, crate::artifacts::sha256_hex(&bytes)))
}

/// `--out`, else the `COVERT_UAV_OUT` environment variable, else `./covert-uav-out`.
pub fn resolve_out(out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| std::env::var_os("COVERT_UAV_OUT").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("covert-uav-out"))
}

fn base_summary(command: &str, hash: &str, s: &Scenario) -> Summary {
    Summary {
        command: command.to_owned(),
        benchmark: false,
        config_sha256: hash.to_owned(),
        seed: 0,
        penalty: None,
        n_slots: s.grid().n_slots,
        min_atr: None,
        converged: None,
        outer_iterations: None,
        tour_length_m: None,
        error: None,
        wall_time_s: 0.0,
    }
}

/// Writes the initial trajectory and schedule.
pub fn cmd_init(scenario: &Path, out: &Path) -> Result<Summary> {
    let start = Instant::now();
    let (s, hash) = load_scenario(scenario)?;
    let run = RunArtifacts::create(out)?;
    let plan = shaf_plan(&s);
    write_csv(&run.path(TRAJECTORY), &trajectory_rows(&s, &plan.trajectory))?;
    write_csv(&run.path(SCHEDULE), &schedule_rows(&s, &plan.schedule))?;
    let summary = Summary {
        tour_length_m: Some(plan.tour.length_m),
        wall_time_s: start.elapsed().as_secs_f64(),
        ..base_summary("init", &hash, &s)
    };
    write_summary(&run.path(SUMMARY), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveOptions {
    pub benchmark: bool,
    pub penalty: PenaltySchedule,
    pub seed: u64,
}

/// SHAF initialization followed by the optimizer.
pub fn solve_scenario(s: &Scenario, opts: &SolveOptions) -> Result<SolveReport> {
    let plan = shaf_plan(s);
    let init = build_initial_iterate(s, &plan.trajectory, &plan.schedule)?;
    psca_solve(s, &init, &opts.penalty, opts.benchmark)
}

/// Result of `solve`: the summary written and the exit code to report.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub summary: Summary,
    pub report: Option<SolveReport>,
    pub exit_code: i32,
}

/// Runs the full pipeline and writes every artifact. Failures are recorded
/// in `summary.json` (with the partial trace in `iterations.csv` when the
/// solver stopped); only an IO failure while writing is returned as `Err`.
pub fn cmd_solve(scenario: &Path, out: &Path, opts: &SolveOptions) -> Result<SolveOutcome> {
    let start = Instant::now();
    let run = RunArtifacts::create(out)?;
    let loaded = load_scenario(scenario);
    let (s, hash) = match loaded {
        Ok(v) => v,
        Err(Error::Io(e)) => return Err(Error::Io(e)),
        Err(e) => {
            let summary = Summary {
                command: "solve".to_owned(),
                benchmark: opts.benchmark,
                config_sha256: String::new(),
                seed: opts.seed,
                penalty: Some(opts.penalty),
                n_slots: 0,
                min_atr: None,
                converged: None,
                outer_iterations: None,
                tour_length_m: None,
                error: Some(run_error(&e)),
                wall_time_s: start.elapsed().as_secs_f64(),
            };
            write_summary(&run.path(SUMMARY), &summary)?;
            return Ok(SolveOutcome { exit_code: exit_code(&e), summary, report: None });
        }
    };
    let mut summary =
        Summary { benchmark: opts.benchmark, seed: opts.seed, penalty: Some(opts.penalty), ..base_summary("solve", &hash, &s) };
    let (report, code) = match solve_scenario(&s, opts) {
        Ok(report) => {
            run.write_report(&s, &report)?;
            summary.min_atr = Some(report.minimum_atr);
            summary.converged = Some(report.converged);
            summary.outer_iterations = Some(report.trace.len());
            let code = if report.converged {
                EXIT_OK
            } else {
                summary.error = Some(RunError {
                    kind: "not_converged".to_owned(),
                    message: format!("no convergence within {} outer iterations", opts.penalty.max_outer),
                    exit_code: EXIT_SOLVER,
                });
                EXIT_SOLVER
            };
            (Some(report), code)
        }
        Err(e) => {
            if let Error::Solver { trace, .. } = &e {
                write_csv(&run.path(ITERATIONS), &iteration_rows(trace))?;
                summary.outer_iterations = Some(trace.len());
            }
            summary.converged = Some(false);
            summary.error = Some(run_error(&e));
            (None, exit_code(&e))
        }
    };
    summary.wall_time_s = start.elapsed().as_secs_f64();
    write_summary(&run.path(SUMMARY), &summary)?;
    Ok(SolveOutcome { summary, report, exit_code: code })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Detection,
    Bounds,
    Outage,
}

/// Sizes used by `validate`: 20 detector geometries, 1000 surrogate draws,
/// 5 outage configurations.
pub fn cmd_validate(suite: Suite, s: &Scenario, seed: u64, samples: u64) -> Vec<Check> {
    match suite {
        Suite::Detection => detection_suite(seed, samples, 20),
        Suite::Bounds => bounds_suite(s, seed, 1000),
        Suite::Outage => outage_suite(s, seed, samples, 5),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "T")]
    Period,
    #[serde(rename = "covert_eps")]
    CovertEps,
    #[serde(rename = "rho_db")]
    RhoDb,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Period => "T",
            SweepParam::CovertEps => "covert_eps",
            SweepParam::RhoDb => "rho_db",
        }
    }

    pub fn apply(self, s: &Scenario, value: f64) -> Result<Scenario> {
        match self {
            SweepParam::Period => s.with_period(value),
            SweepParam::CovertEps => s.with_covert_eps(value),
            SweepParam::RhoDb => s.with_rho(db_to_linear(value)),
        }
    }
}

/// One line of `sweep.csv`. Failed values keep their row with empty
/// metrics and the error kind as status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub min_atr: Option<f64>,
    pub mean_center_distance: Option<f64>,
    pub mean_p_umax: Option<f64>,
    pub status: String,
}

pub const SWEEP: &str = "sweep.csv";

/// Solves the scenario once per value, in parallel, writing each run to
/// `out/<param>=<value>/` and the aggregate to `out/sweep.csv` sorted by value.
pub fn cmd_sweep(scenario: &Path, param: SweepParam, values: &[f64], out: &Path, opts: &SolveOptions) -> Result<Vec<SweepRow>> {
    let (base, hash) = load_scenario(scenario)?;
    let run = RunArtifacts::create(out)?;
    let mut rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| -> Result<SweepRow> {
            let failed = |e: &Error| SweepRow {
                value,
                min_atr: None,
                mean_center_distance: None,
                mean_p_umax: None,
                status: error_kind(e).to_owned(),
            };
            let s = match param.apply(&base, value) {
                Ok(s) => s,
                Err(e) => return Ok(failed(&e)),
            };
            let dir = RunArtifacts::create(out.join(format!("{}={value}", param.name())))?;
            let mut summary =
                Summary { benchmark: opts.benchmark, seed: opts.seed, penalty: Some(opts.penalty), ..base_summary("sweep", &hash, &s) };
            let start = Instant::now();
            let row = match solve_scenario(&s, opts) {
                Ok(report) => {
                    dir.write_report(&s, &report)?;
                    summary.min_atr = Some(report.minimum_atr);
                    summary.converged = Some(report.converged);
                    summary.outer_iterations = Some(report.trace.len());
                    let n = report.p_umax.len() as f64;
                    SweepRow {
                        value,
                        min_atr: Some(report.minimum_atr),
                        mean_center_distance: Some(report.trajectory.mean_distance_from(s.center())),
                        mean_p_umax: Some(report.p_umax.iter().sum::<f64>() / n),
                        status: if report.converged { "converged" } else { "not_converged" }.to_owned(),
                    }
                }
                Err(e) => {
                    summary.error = Some(run_error(&e));
                    failed(&e)
                }
            };
            summary.wall_time_s = start.elapsed().as_secs_f64();
            write_summary(&dir.path(SUMMARY), &summary)?;
            Ok(row)
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    write_csv(&run.path(SWEEP), &rows)?;
    Ok(rows)
}
