//! Penalty successive convex approximation.
//!
//! The binary schedule is relaxed to `[0, 1]` and its integrality gap
//! `sum (x - x^2)` is bounded by a slack `phi` that the objective penalizes
//! with a growing weight `mu`. Each outer iteration solves a convex
//! restriction tangent at the current point, so every accepted iterate is
//! feasible for the true constraints and the penalized objective never
//! decreases while `mu` is held.

pub mod subproblem;
pub mod surrogate;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::Uplink;
use crate::conic::{self, SolveStatus};
use crate::detection::{min_covert_power, strongest_warden};
use crate::error::{Error, Result};
use crate::shaf::{Trajectory, MIN_POWER_FRACTION};
use crate::scenario::Scenario;

pub use subproblem::{build_subproblem, Layout, Subproblem, LENGTH_SCALE};
pub use surrogate::{rate_lower_bound, xi_upper_bound, CovertSurrogate, RateSurrogate};

/// Dense user-by-slot matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSlots {
    n_users: usize,
    n_slots: usize,
    data: Vec<f64>,
}

impl UserSlots {
    pub fn zeros(n_users: usize, n_slots: usize) -> Self {
        UserSlots { n_users, n_slots, data: vec![0.0; n_users * n_slots] }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.data[k * self.n_slots + n]
    }

    pub fn set(&mut self, k: usize, n: usize, v: f64) {
        self.data[k * self.n_slots + n] = v;
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_slots..(k + 1) * self.n_slots]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// One feasible point of the penalized problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub x: UserSlots,
    pub q: Trajectory,
    /// AN power cap per slot, watts.
    pub p_umax: Vec<f64>,
    /// Rate slack per user and slot, bps/Hz.
    pub nu: UserSlots,
    /// Covertness slack per user and slot.
    pub omega: UserSlots,
    pub eta: f64,
    pub phi: f64,
}

impl Iterate {
    /// `sum (x - x^2)`, zero exactly when the schedule is binary.
    pub fn binary_gap(&self) -> f64 {
        self.x.values().iter().map(|x| x - x * x).sum()
    }

    /// Largest distance of a schedule entry from the nearer of 0 and 1.
    pub fn max_fractionality(&self) -> f64 {
        self.x.values().iter().map(|&x| x.min(1.0 - x)).fold(0.0, f64::max)
    }

    /// Exact average rate per user under this schedule, power and trajectory.
    pub fn average_rates(&self, s: &Scenario) -> Vec<f64> {
        let n = self.q.len();
        (0..s.n_users())
            .map(|k| {
                (0..n)
                    .map(|j| {
                        let x = self.x.get(k, j);
                        if x == 0.0 {
                            0.0
                        } else {
                            x * Uplink::from_scenario(s, k, self.q.waypoints[j]).covert_rate(self.p_umax[j], s.rc().outage_eps)
                        }
                    })
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }
}

/// Largest violation of each true constraint family; all zero when feasible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `eta` above some user's exact average rate.
    pub average_rate: f64,
    /// `1 - eps` above the schedule-weighted minimum detection error.
    pub covertness: f64,
    /// More than one unit of schedule in a slot.
    pub scheduling: f64,
    /// Schedule outside `[0, 1]`.
    pub schedule_bounds: f64,
    /// AN cap outside `[0, P_cap]`, watts.
    pub power: f64,
    /// Distance between first and last waypoint, meters.
    pub closure: f64,
    /// Step length above the speed limit, meters.
    pub speed: f64,
    /// Integrality gap above `phi`.
    pub binary: f64,
}

impl FeasibilityReport {
    pub fn max(&self) -> f64 {
        [
            self.average_rate,
            self.covertness,
            self.scheduling,
            self.schedule_bounds,
            self.power,
            self.closure,
            self.speed,
            self.binary,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Evaluates the exact (nonconvex) constraints at `it`.
pub fn verify_iterate(it: &Iterate, s: &Scenario) -> FeasibilityReport {
    let (k_users, n_slots) = (s.n_users(), it.q.len());
    let cap = s.uav().p_max_an_w;
    let target = 1.0 - s.rc().covert_eps;
    let rates = it.average_rates(s);
    let mut r = FeasibilityReport {
        average_rate: rates.iter().map(|&a| it.eta - a).fold(0.0, f64::max),
        closure: it.q.closure_gap(),
        speed: it.q.speed_excess(s.step_limit()),
        binary: (it.binary_gap() - it.phi).max(0.0),
        ..Default::default()
    };
    for n in 0..n_slots {
        let q = it.q.waypoints[n];
        let mut load = 0.0;
        let mut covert = 0.0;
        for k in 0..k_users {
            let x = it.x.get(k, n);
            load += x;
            r.schedule_bounds = r.schedule_bounds.max(-x).max(x - 1.0);
            if x != 0.0 {
                covert += x * strongest_warden(s, k, q, it.p_umax[n]).0;
            }
        }
        r.scheduling = r.scheduling.max(load - 1.0);
        r.covertness = r.covertness.max(target - covert);
        r.power = r.power.max(it.p_umax[n] - cap).max(-it.p_umax[n]);
    }
    r
}

/// Penalty weight schedule and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub mu0: f64,
    pub growth: f64,
    pub mu_max: f64,
    pub max_outer: usize,
    pub tol_obj: f64,
    pub tol_phi: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        PenaltySchedule { mu0: 0.1, growth: 1.3, mu_max: 1e4, max_outer: 200, tol_obj: 1e-4, tol_phi: 1e-5 }
    }
}

impl PenaltySchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu0 > 0.0
            && self.growth >= 1.0
            && self.mu_max >= self.mu0
            && self.max_outer >= 1
            && self.tol_obj > 0.0
            && self.tol_phi > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid penalty schedule {self:?}")))
        }
    }
}

/// One outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub mu: f64,
    pub eta: f64,
    pub phi: f64,
    /// `eta - mu phi` reported by the subproblem.
    pub objective: f64,
    pub status: SolveStatus,
    /// Largest true-constraint violation of the accepted iterate.
    pub max_violation: f64,
    pub solver_iterations: u32,
}

/// Outcome of the optimizer after rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Scheduled user index per slot.
    pub schedule: Vec<usize>,
    pub trajectory: Trajectory,
    /// Re-tightened AN cap per slot, watts.
    pub p_umax: Vec<f64>,
    pub average_rates: Vec<f64>,
    pub minimum_atr: f64,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    /// Last accepted iterate, before rounding.
    pub relaxed: Iterate,
    pub wall_time_s: f64,
}

/// Solves the penalized problem from `init` and rounds the schedule.
pub fn psca_solve(s: &Scenario, init: &Iterate, schedule: &PenaltySchedule, fixed_trajectory: bool) -> Result<SolveReport> {
    schedule.validate()?;
    let start = Instant::now();
    let min_power = MIN_POWER_FRACTION * s.uav().p_max_an_w;
    let mut it = init.clone();
    let mut mu = schedule.mu0;
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut converged = false;
    for r in 1..=schedule.max_outer {
        let sub = build_subproblem(&it, mu, s, fixed_trajectory)?;
        let sol = conic::solve(&sub.program);
        if sol.status != SolveStatus::Optimal {
            trace.push(TraceEntry {
                iteration: r,
                mu,
                eta: f64::NAN,
                phi: f64::NAN,
                objective: f64::NAN,
                status: sol.status,
                max_violation: f64::NAN,
                solver_iterations: sol.iterations,
            });
            return Err(Error::Solver { iteration: r, status: sol.status, trace });
        }
        let mut next = sub.iterate_of(&sol.primal, s.uav().altitude_m, min_power);
        if fixed_trajectory {
            // Unit scaling does not round-trip exactly; keep the pinned path bit for bit.
            next.q = it.q.clone();
        }
        let objective = sol.objective_value;
        trace.push(TraceEntry {
            iteration: r,
            mu,
            eta: next.eta,
            phi: next.phi,
            objective,
            status: sol.status,
            max_violation: verify_iterate(&next, s).max(),
            solver_iterations: sol.iterations,
        });
        it = next;
        if r >= 2 {
            let prev = trace[trace.len() - 2].objective;
            if (objective - prev).abs() <= schedule.tol_obj && it.phi <= schedule.tol_phi {
                converged = true;
                break;
            }
        }
        mu = (mu * schedule.growth).min(schedule.mu_max);
    }
    let (sched, p_umax) = round_schedule(&it, s)?;
    let mut x = UserSlots::zeros(s.n_users(), it.q.len());
    for (n, &k) in sched.iter().enumerate() {
        x.set(k, n, 1.0);
    }
    let rounded = Iterate { x, p_umax: p_umax.clone(), ..it.clone() };
    let average_rates = rounded.average_rates(s);
    let minimum_atr = average_rates.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SolveReport {
        schedule: sched,
        trajectory: it.q.clone(),
        p_umax,
        average_rates,
        minimum_atr,
        converged,
        trace,
        relaxed: it,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Nearest-binary schedule (ties to 0) with the AN cap re-tightened to the
/// least covert power of the scheduled user in each slot.
pub fn round_schedule(it: &Iterate, s: &Scenario) -> Result<(Vec<usize>, Vec<f64>)> {
    let cap = s.uav().p_max_an_w;
    let min_power = MIN_POWER_FRACTION * cap;
    let mut sched = Vec::with_capacity(it.q.len());
    let mut power = Vec::with_capacity(it.q.len());
    let mut bad = Vec::new();
    for n in 0..it.q.len() {
        let chosen: Vec<usize> = (0..s.n_users()).filter(|&k| it.x.get(k, n) > 0.5).collect();
        let &[k] = chosen.as_slice() else {
            bad.push(n);
            sched.push(usize::MAX);
            power.push(it.p_umax[n]);
            continue;
        };
        match min_covert_power(s, k, it.q.waypoints[n], s.rc().covert_eps, cap) {
            Some(p) => power.push(p.max(min_power)),
            None => {
                bad.push(n);
                power.push(it.p_umax[n]);
            }
        }
        sched.push(k);
    }
    if bad.is_empty() {
        Ok((sched, power))
    } else {
        Err(Error::Rounding { slots: bad })
    }
}
