//! Writes the first convex subproblem of the reference scenario as JSON.
//!
//! Usage: `dump_subproblem <out.json> [--fixed] [--slot <seconds>]`

use covert_uav::psca::{build_subproblem, PenaltySchedule};
use covert_uav::scenario::ScenarioFile;
use covert_uav::shaf::{build_initial_iterate, shaf_plan};

const USAGE: &str = "usage: dump_subproblem <out.json> [--fixed] [--slot <seconds>]";

fn main() -> covert_uav::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().expect(USAGE);
    let (mut fixed, mut slot) = (false, None);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--fixed" => fixed = true,
            "--slot" => slot = Some(args.next().and_then(|v| v.parse::<f64>().ok()).expect(USAGE)),
            _ => panic!("{USAGE}"),
        }
    }
    let mut s = ScenarioFile::reference().to_scenario()?;
    if let Some(slot) = slot {
        s = s.with_slot(slot)?;
    }
    let plan = shaf_plan(&s);
    let init = build_initial_iterate(&s, &plan.trajectory, &plan.schedule)?;
    let sub = build_subproblem(&init, PenaltySchedule::default().mu0, &s, fixed)?;
    std::fs::write(&out, sub.program.to_json())?;
    eprintln!("{} variables, {} rows -> {out}", sub.program.n_vars(), sub.program.n_rows());
    Ok(())
}
