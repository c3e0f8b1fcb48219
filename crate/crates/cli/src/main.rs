use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use covert_uav::psca::PenaltySchedule;
use covert_uav::scenario::ScenarioFile;
use covert_uav_cli::commands::{
    cmd_init, cmd_solve, cmd_sweep, cmd_validate, exit_code, load_scenario, resolve_out, SolveOptions, Suite, SweepParam,
    EXIT_OK, EXIT_VALIDATION,
};

#[derive(Parser)]
#[command(name = "covert-uav", version, about = "Covert UAV data collection planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct PenaltyArgs {
    /// Initial penalty weight.
    #[arg(long, default_value_t = PenaltySchedule::default().mu0)]
    mu0: f64,
    /// Penalty growth factor per outer iteration.
    #[arg(long, default_value_t = PenaltySchedule::default().growth)]
    growth: f64,
    /// Penalty weight cap.
    #[arg(long, default_value_t = PenaltySchedule::default().mu_max)]
    mu_max: f64,
    /// Stop when the objective changes by at most this much...
    #[arg(long, default_value_t = PenaltySchedule::default().tol_obj)]
    tol_obj: f64,
    /// ...and the integrality slack is at most this.
    #[arg(long, default_value_t = PenaltySchedule::default().tol_phi)]
    tol_phi: f64,
    /// Outer iteration cap.
    #[arg(long, default_value_t = PenaltySchedule::default().max_outer)]
    max_outer: usize,
    /// Keep the initial trajectory and optimize only power and schedule.
    #[arg(long)]
    benchmark: bool,
    /// Recorded in the summary; the solve itself draws no random numbers.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PenaltyArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            benchmark: self.benchmark,
            penalty: PenaltySchedule {
                mu0: self.mu0,
                growth: self.growth,
                mu_max: self.mu_max,
                max_outer: self.max_outer,
                tol_obj: self.tol_obj,
                tol_phi: self.tol_phi,
            },
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Detection,
    Bounds,
    Outage,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    #[value(name = "T")]
    T,
    #[value(name = "covert_eps")]
    CovertEps,
    #[value(name = "rho_db")]
    RhoDb,
}

#[derive(Subcommand)]
enum Command {
    /// Build the initial hover-and-fly trajectory and schedule.
    Init {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory [default: $COVERT_UAV_OUT or ./covert-uav-out]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize trajectory, AN power and schedule.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        penalty: PenaltyArgs,
    },
    /// Check the closed forms against sampling and brute force.
    Validate {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Monte Carlo samples per comparison.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Scenario for the bounds and outage suites [default: built-in reference].
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Solve once per parameter value and aggregate.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: ParamArg,
        /// Comma-separated values, e.g. 0.01,0.05,0.1
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        penalty: PenaltyArgs,
    },
    /// Print the built-in reference scenario file.
    Reference,
}

fn run(cli: Cli) -> covert_uav::Result<i32> {
    match cli.command {
        Command::Init { scenario, out } => {
            let out = resolve_out(out);
            let summary = cmd_init(&scenario, &out)?;
            println!(
                "initial trajectory written to {} (tour {:.2} m)",
                out.display(),
                summary.tour_length_m.unwrap_or(f64::NAN)
            );
            Ok(EXIT_OK)
        }
        Command::Solve { scenario, out, penalty } => {
            let out = resolve_out(out);
            let outcome = cmd_solve(&scenario, &out, &penalty.options())?;
            match (&outcome.summary.error, outcome.summary.min_atr) {
                (None, Some(atr)) => println!("minimum average rate {atr:.6} bps/Hz; artifacts in {}", out.display()),
                (Some(e), _) => eprintln!("error ({}): {}", e.kind, e.message),
                _ => {}
            }
            Ok(outcome.exit_code)
        }
        Command::Validate { suite, seed, samples, scenario } => {
            let s = match scenario {
                Some(path) => load_scenario(&path)?.0,
                None => ScenarioFile::reference().to_scenario()?,
            };
            let suite = match suite {
                SuiteArg::Detection => Suite::Detection,
                SuiteArg::Bounds => Suite::Bounds,
                SuiteArg::Outage => Suite::Outage,
            };
            let checks = cmd_validate(suite, &s, seed, samples);
            for c in &checks {
                println!("{} {}: {:.3e} (limit {:.3e}, margin {:.3e})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value, c.limit, c.margin());
            }
            let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
            if failed.is_empty() {
                println!("{} checks passed", checks.len());
                Ok(EXIT_OK)
            } else {
                eprintln!("{} of {} checks failed:", failed.len(), checks.len());
                for c in failed {
                    eprintln!("  {}", c.name);
                }
                Ok(EXIT_VALIDATION)
            }
        }
        Command::Sweep { scenario, param, values, out, penalty } => {
            let out = resolve_out(out);
            let param = match param {
                ParamArg::T => SweepParam::Period,
                ParamArg::CovertEps => SweepParam::CovertEps,
                ParamArg::RhoDb => SweepParam::RhoDb,
            };
            let rows = cmd_sweep(&scenario, param, &values, &out, &penalty.options())?;
            for r in &rows {
                println!("{}={} min_atr={:?} status={}", param.name(), r.value, r.min_atr, r.status);
            }
            Ok(EXIT_OK)
        }
        Command::Reference => {
            println!("{}", ScenarioFile::reference().to_json_pretty());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
