//! Files written by a run, each with a parser so runs can be reloaded and
//! compared.
//!
//! CSV headers and column order are fixed; floats are written in the
//! shortest form that parses back to the same value, except dBm which is
//! rounded to four decimals next to the full-precision watts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use covert_uav::psca::{PenaltySchedule, SolveReport, TraceEntry};
use covert_uav::scenario::watts_to_dbm;
use covert_uav::shaf::Trajectory;
use covert_uav::{Error, Result, Scenario};

pub const TRAJECTORY: &str = "trajectory.csv";
pub const POWER: &str = "power.csv";
pub const SCHEDULE: &str = "schedule.csv";
pub const RATES: &str = "rates.csv";
pub const DETECTION: &str = "detection.csv";
pub const ITERATIONS: &str = "iterations.csv";
pub const SUMMARY: &str = "summary.json";

/// Schedule entry for a slot with no user.
pub const UNSCHEDULED: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub n: usize,
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub n: usize,
    pub p_umax_dbm: f64,
    pub p_umax_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub n: usize,
    pub user_id: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub k: u32,
    pub avg_rate_bps_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub n: usize,
    pub m: u32,
    pub xi_star: f64,
    pub strongest_flag: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub r: usize,
    pub mu: f64,
    pub eta: f64,
    pub phi: f64,
    pub objective: f64,
    pub status: String,
}

/// Why a run stopped without a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub benchmark: bool,
    /// SHA-256 of the scenario file bytes, lowercase hex.
    pub config_sha256: String,
    pub seed: u64,
    pub penalty: Option<PenaltySchedule>,
    pub n_slots: usize,
    pub min_atr: Option<f64>,
    pub converged: Option<bool>,
    pub outer_iterations: Option<usize>,
    pub tour_length_m: Option<f64>,
    pub error: Option<RunError>,
    pub wall_time_s: f64,
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Malformed artifacts surface as `InvalidData` IO errors naming the file.
fn invalid_data(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| invalid_data(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| invalid_data(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| invalid_data(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| invalid_data(path, e))).collect()
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| invalid_data(path, e))
}

pub fn trajectory_rows(s: &Scenario, traj: &Trajectory) -> Vec<TrajectoryRow> {
    let dt = s.grid().slot_s;
    traj.waypoints
        .iter()
        .enumerate()
        .map(|(n, p)| TrajectoryRow { n, t_s: n as f64 * dt, x_m: p.x, y_m: p.y })
        .collect()
}

/// dBm rounded to four decimals; zero watts maps to negative infinity.
pub fn rounded_dbm(watts: f64) -> f64 {
    (watts_to_dbm(watts) * 1e4).round() / 1e4
}

pub fn power_rows(p_umax: &[f64]) -> Vec<PowerRow> {
    p_umax.iter().enumerate().map(|(n, &w)| PowerRow { n, p_umax_dbm: rounded_dbm(w), p_umax_w: w }).collect()
}

/// Schedule as user ids; indices out of range are written as unscheduled.
pub fn schedule_rows(s: &Scenario, schedule: &[usize]) -> Vec<ScheduleRow> {
    schedule
        .iter()
        .enumerate()
        .map(|(n, &k)| ScheduleRow { n, user_id: s.users().get(k).map_or(UNSCHEDULED, |u| i64::from(u.id)) })
        .collect()
}

pub fn rate_rows(s: &Scenario, rates: &[f64]) -> Vec<RateRow> {
    s.users().iter().zip(rates).map(|(u, &r)| RateRow { k: u.id, avg_rate_bps_hz: r }).collect()
}

/// Minimum detection error of every warden in every slot, with the
/// strongest (smallest error) warden flagged.
pub fn detection_rows(s: &Scenario, traj: &Trajectory, schedule: &[usize], p_umax: &[f64]) -> Vec<DetectionRow> {
    use covert_uav::detection::DetectorGeometry;
    let mut rows = Vec::new();
    for (n, &k) in schedule.iter().enumerate() {
        if k >= s.n_users() {
            continue;
        }
        let q = traj.waypoints[n];
        let errors: Vec<(usize, f64)> = (0..s.n_users())
            .filter(|&m| m != k)
            .map(|m| (m, DetectorGeometry::from_scenario(s, k, m, q, p_umax[n]).optimal().min_error))
            .collect();
        let strongest = errors.iter().cloned().fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a }).0;
        for (m, xi) in errors {
            rows.push(DetectionRow { n, m: s.users()[m].id, xi_star: xi, strongest_flag: u8::from(m == strongest) });
        }
    }
    rows
}

pub fn iteration_rows(trace: &[TraceEntry]) -> Vec<IterationRow> {
    trace
        .iter()
        .map(|t| IterationRow {
            r: t.iteration,
            mu: t.mu,
            eta: t.eta,
            phi: t.phi,
            objective: t.objective,
            status: serde_json::to_value(t.status).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        })
        .collect()
}

/// Output directory of one run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
}

impl RunArtifacts {
    pub fn create(out_dir: impl Into<PathBuf>) -> Result<Self> {
        let out_dir = out_dir.into();
        fs::create_dir_all(&out_dir)?;
        Ok(RunArtifacts { out_dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes every solve artifact except the summary.
    pub fn write_report(&self, s: &Scenario, report: &SolveReport) -> Result<()> {
        write_csv(&self.path(TRAJECTORY), &trajectory_rows(s, &report.trajectory))?;
        write_csv(&self.path(POWER), &power_rows(&report.p_umax))?;
        write_csv(&self.path(SCHEDULE), &schedule_rows(s, &report.schedule))?;
        write_csv(&self.path(RATES), &rate_rows(s, &report.average_rates))?;
        write_csv(&self.path(DETECTION), &detection_rows(s, &report.trajectory, &report.schedule, &report.p_umax))?;
        write_csv(&self.path(ITERATIONS), &iteration_rows(&report.trace))?;
        Ok(())
    }

    pub fn trajectory(&self) -> Result<Vec<TrajectoryRow>> {
        read_csv(&self.path(TRAJECTORY))
    }

    pub fn power(&self) -> Result<Vec<PowerRow>> {
        read_csv(&self.path(POWER))
    }

    pub fn schedule(&self) -> Result<Vec<ScheduleRow>> {
        read_csv(&self.path(SCHEDULE))
    }

    pub fn rates(&self) -> Result<Vec<RateRow>> {
        read_csv(&self.path(RATES))
    }

    pub fn detection(&self) -> Result<Vec<DetectionRow>> {
        read_csv(&self.path(DETECTION))
    }

    pub fn iterations(&self) -> Result<Vec<IterationRow>> {
        read_csv(&self.path(ITERATIONS))
    }

    pub fn summary(&self) -> Result<Summary> {
        read_summary(&self.path(SUMMARY))
    }
}
