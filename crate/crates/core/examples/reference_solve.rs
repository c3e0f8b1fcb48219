//! Solves the four-user reference scenario and prints the trace.
//!
//! ```text
//! cargo run --release --example reference_solve -- [mu0] [fixed]
//! ```

use covert_uav::psca::{psca_solve, verify_iterate, PenaltySchedule};
use covert_uav::scenario::ScenarioFile;
use covert_uav::shaf::{build_initial_iterate, shaf_plan};

fn main() -> covert_uav::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mu0 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(PenaltySchedule::default().mu0);
    let fixed = args.get(2).is_some_and(|a| a == "fixed");
    let s = ScenarioFile::reference().to_scenario()?;
    let plan = shaf_plan(&s);
    let init = build_initial_iterate(&s, &plan.trajectory, &plan.schedule)?;
    println!("initial eta {:.4}, violation {:.2e}", init.eta, verify_iterate(&init, &s).max());
    let schedule = PenaltySchedule { mu0, ..Default::default() };
    let report = psca_solve(&s, &init, &schedule, fixed)?;
    for t in &report.trace {
        println!(
            "{:3} mu {:9.4} eta {:.5} phi {:.2e} obj {:.6} viol {:.1e} ipm {}",
            t.iteration, t.mu, t.eta, t.phi, t.objective, t.max_violation, t.solver_iterations
        );
    }
    println!(
        "converged {} min ATR {:.5} rates {:?} wall {:.1}s",
        report.converged, report.minimum_atr, report.average_rates, report.wall_time_s
    );
    Ok(())
}
