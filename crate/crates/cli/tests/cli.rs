use std::path::{Path, PathBuf};
use std::process::Command;

use covert_uav::psca::PenaltySchedule;
use covert_uav::scenario::ScenarioFile;
use covert_uav_cli::artifacts::{
    read_csv, sha256_hex, write_csv, PowerRow, RunArtifacts, TrajectoryRow, POWER, SCHEDULE, TRAJECTORY,
};
use covert_uav_cli::commands::{cmd_init, cmd_solve, cmd_sweep, cmd_validate, SolveOptions, Suite, SweepParam, EXIT_VALIDATION};

fn reference_file(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&ScenarioFile::reference().to_json_pretty()).unwrap();
    edit(&mut v);
    let path = dir.join("scenario.json");
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

/// Reference geometry on two-second slots so solves stay quick.
fn coarse(v: &mut serde_json::Value) {
    v["grid"]["slot_s"] = 2.0.into();
}

fn quick() -> SolveOptions {
    SolveOptions { penalty: PenaltySchedule { max_outer: 60, ..Default::default() }, ..Default::default() }
}

#[test]
fn init_scales_the_path_to_the_period() {
    let dir = tempfile::tempdir().unwrap();
    for (period, length) in [(120.0, 720.0), (60.0, 360.0)] {
        let scenario = reference_file(dir.path(), |v| v["grid"]["period_s"] = period.into());
        let out = dir.path().join(format!("init-{period}"));
        let summary = cmd_init(&scenario, &out).unwrap();
        let run = RunArtifacts { out_dir: out };
        let traj = run.trajectory().unwrap();
        assert_eq!(traj.len(), period as usize);
        let steps: Vec<f64> = traj.windows(2).map(|w| (w[1].x_m - w[0].x_m).hypot(w[1].y_m - w[0].y_m)).collect();
        assert!(steps.iter().all(|&d| d <= 6.0 + 1e-9));
        // N - 1 full-speed steps, shortened a little where samples cut corners.
        let polyline: f64 = steps.iter().sum();
        assert!(polyline <= length - 6.0 + 1e-9 && polyline > 0.95 * length, "{polyline}");
        assert_eq!(run.schedule().unwrap().len(), traj.len());
        assert_eq!(summary.config_sha256, sha256_hex(&std::fs::read(&scenario).unwrap()));
    }
}

#[test]
fn init_hovers_over_each_user_at_the_full_period() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = reference_file(dir.path(), |_| {});
    cmd_init(&scenario, dir.path()).unwrap();
    let run = RunArtifacts { out_dir: dir.path().to_owned() };
    let traj = run.trajectory().unwrap();
    let users = [(200.0, 0.0), (0.0, 120.0), (-200.0, 0.0), (0.0, -120.0)];
    let over: Vec<usize> = users.iter().map(|&(x, y)| traj.iter().filter(|r| r.x_m == x && r.y_m == y).count()).collect();
    // Four 39-step legs leave 240 - 4 * 38 waypoints on top of users: about
    // 21 hover steps each plus arrivals and the closing point.
    assert_eq!(over.iter().sum::<usize>(), 88);
    assert!(over.iter().all(|&c| (21..=23).contains(&c)), "{over:?}");
}

#[test]
fn solve_artifacts_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = reference_file(dir.path(), coarse);
    let out = dir.path().join("run");
    let outcome = cmd_solve(&scenario, &out, &quick()).unwrap();
    assert_eq!(outcome.exit_code, 0);
    let run = RunArtifacts { out_dir: out };
    let summary = run.summary().unwrap();
    assert_eq!(summary, outcome.summary);
    assert_eq!(summary.config_sha256, sha256_hex(&std::fs::read(&scenario).unwrap()));

    let rates = run.rates().unwrap();
    let min = rates.iter().map(|r| r.avg_rate_bps_hz).fold(f64::INFINITY, f64::min);
    assert!((min - summary.min_atr.unwrap()).abs() <= 1e-9);

    let ids: Vec<u32> = rates.iter().map(|r| r.k).collect();
    for row in run.schedule().unwrap() {
        assert!(ids.contains(&u32::try_from(row.user_id).unwrap()));
    }
    let n = summary.n_slots;
    assert_eq!(run.trajectory().unwrap().len(), n);
    assert_eq!(run.power().unwrap().len(), n);
    // One row per (slot, warden), exactly one warden flagged per slot.
    let detection = run.detection().unwrap();
    assert_eq!(detection.len(), n * (ids.len() - 1));
    let flagged: u32 = detection.iter().map(|r| u32::from(r.strongest_flag)).sum();
    assert_eq!(flagged as usize, n);
    assert_eq!(run.iterations().unwrap().len(), summary.outer_iterations.unwrap());
}

#[test]
fn csv_files_round_trip_and_keep_their_headers() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = reference_file(dir.path(), coarse);
    cmd_solve(&scenario, dir.path(), &quick()).unwrap();
    let run = RunArtifacts { out_dir: dir.path().to_owned() };

    let header = |name: &str| std::fs::read_to_string(run.path(name)).unwrap().lines().next().unwrap().to_owned();
    assert_eq!(header(TRAJECTORY), "n,t_s,x_m,y_m");
    assert_eq!(header(POWER), "n,p_umax_dbm,p_umax_w");
    assert_eq!(header(SCHEDULE), "n,user_id");
    assert_eq!(header("rates.csv"), "k,avg_rate_bps_hz");
    assert_eq!(header("detection.csv"), "n,m,xi_star,strongest_flag");
    assert_eq!(header("iterations.csv"), "r,mu,eta,phi,objective,status");

    let traj = run.trajectory().unwrap();
    let copy = dir.path().join("copy.csv");
    write_csv(&copy, &traj).unwrap();
    assert_eq!(read_csv::<TrajectoryRow>(&copy).unwrap(), traj);
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(run.path(TRAJECTORY)).unwrap());

    for row in read_csv::<PowerRow>(&run.path(POWER)).unwrap() {
        let dbm = 10.0 * (row.p_umax_w * 1e3).log10();
        assert!((row.p_umax_dbm - dbm).abs() <= 5e-5 + 1e-12);
        assert_eq!(row.p_umax_dbm, (row.p_umax_dbm * 1e4).round() / 1e4);
    }
}

#[test]
fn invalid_scenario_is_reported_in_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = reference_file(dir.path(), |v| v["constraints"]["outage_eps"] = 1.0.into());
    let out = dir.path().join("run");
    let outcome = cmd_solve(&scenario, &out, &quick()).unwrap();
    assert_eq!(outcome.exit_code, EXIT_VALIDATION);
    let err = RunArtifacts { out_dir: out }.summary().unwrap().error.unwrap();
    assert_eq!(err.kind, "validation");
    assert_eq!(err.exit_code, EXIT_VALIDATION);
}

#[test]
fn binary_exit_codes_follow_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_covert-uav");
    let bad = reference_file(dir.path(), |v| v["users"].as_array_mut().unwrap().truncate(1));
    let status = Command::new(bin).arg("solve").arg("--scenario").arg(&bad).arg("--out").arg(dir.path().join("bad")).status().unwrap();
    assert_eq!(status.code(), Some(2));

    // Too much self-interference leaves no covert AN power: infeasible.
    let infeasible = reference_file(dir.path(), |v| v["uav"]["p_max_an_dbm"] = 0.0.into());
    let status =
        Command::new(bin).arg("solve").arg("--scenario").arg(&infeasible).arg("--out").arg(dir.path().join("inf")).status().unwrap();
    assert_eq!(status.code(), Some(3));

    let missing = Command::new(bin).args(["init", "--scenario", "/nonexistent/scenario.json"]).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(missing.code(), Some(1));
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = reference_file(dir.path(), |_| {});
    let out = dir.path().join("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_covert-uav"))
        .arg("init")
        .arg("--scenario")
        .arg(&scenario)
        .env("COVERT_UAV_OUT", &out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join(TRAJECTORY).exists());
}

#[test]
fn validate_suites_pass_at_small_sizes() {
    let s = ScenarioFile::reference().to_scenario().unwrap();
    for suite in [Suite::Detection, Suite::Bounds, Suite::Outage] {
        let checks = cmd_validate(suite, &s, 5, 20_000);
        assert!(!checks.is_empty());
        assert!(checks.iter().all(|c| c.passed), "{suite:?}: {:?}", checks.iter().find(|c| !c.passed));
    }
}

#[test]
fn sweep_keeps_failed_values_and_sorts_rows() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = reference_file(dir.path(), coarse);
    // 1.5 is outside (0, 1) and fails validation; the others solve.
    let rows = cmd_sweep(&scenario, SweepParam::CovertEps, &[0.1, 1.5, 0.03], dir.path(), &quick()).unwrap();
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    assert_eq!(values, [0.03, 0.1, 1.5]);
    assert_eq!(rows[2].status, "validation");
    assert!(rows[2].min_atr.is_none());
    assert_eq!(rows[0].status, "converged");
    assert!(rows[1].min_atr.unwrap() >= rows[0].min_atr.unwrap());
    assert!(dir.path().join("covert_eps=0.03").join("summary.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("value,min_atr,mean_center_distance,mean_p_umax,status\n"));
}
