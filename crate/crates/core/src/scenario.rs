//! Problem instances: ground users, UAV limits, time grid and the
//! reliability/covertness targets.
//!
//! Everything inside a [`Scenario`] is in SI units (watts, meters, seconds,
//! linear power gains). Decibel values only appear in [`ScenarioFile`], the
//! JSON schema read from disk.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

/// Ground path-loss exponent used by `"auto_pathloss"` when the file does
/// not set one.
///
/// With an exponent of 2 the reference instance cannot be made covert: the
/// required AN power is roughly ten times the 36 dBm cap.
pub const DEFAULT_GROUND_PATHLOSS_EXPONENT: f64 = 3.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Mean ground-to-ground channel power `ref_gain * d^-exponent`.
pub fn pathloss_fading(ref_gain: f64, exponent: f64, a: Point, b: Point) -> f64 {
    ref_gain * a.dist(b).powf(-exponent)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundUser {
    pub id: u32,
    pub position: Point,
    /// Constant per-slot transmit power.
    pub tx_power_w: f64,
    /// Mean power of the channel from this user to each peer, keyed by peer id.
    pub inter_user_fading: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavParams {
    pub altitude_m: f64,
    pub v_max_mps: f64,
    /// Global cap on the maximum AN power of every slot.
    pub p_max_an_w: f64,
    /// Self-interference cancellation coefficient, in [0, 1].
    pub self_interference_rho: f64,
    /// Mean power of the self-interference channel.
    pub self_interference_fading: f64,
    pub rx_noise_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub period_s: f64,
    pub n_slots: usize,
    pub slot_s: f64,
}

impl TimeGrid {
    /// Builds the grid from the flight period and slot length; the period
    /// must be a whole number of slots.
    pub fn new(period_s: f64, slot_s: f64) -> Result<Self> {
        if !(slot_s > 0.0 && slot_s.is_finite()) {
            return Err(Error::Validation(format!("slot_s must be positive, got {slot_s}")));
        }
        if !(period_s > 0.0 && period_s.is_finite()) {
            return Err(Error::Validation(format!("period_s must be positive, got {period_s}")));
        }
        let ratio = period_s / slot_s;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Validation(format!(
                "period_s {period_s} is not a whole number of {slot_s} s slots"
            )));
        }
        let n_slots = n as usize;
        if n_slots < 2 {
            return Err(Error::Validation(format!("need at least 2 slots, got {n_slots}")));
        }
        Ok(Self { period_s: n_slots as f64 * slot_s, n_slots, slot_s })
    }

    /// Largest distance the UAV may cover between consecutive waypoints.
    pub fn step_limit(&self, v_max_mps: f64) -> f64 {
        v_max_mps * self.slot_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityCovertness {
    /// Maximum tolerable outage probability.
    pub outage_eps: f64,
    /// Covertness slack: every detector's minimum error rate must be at least `1 - covert_eps`.
    pub covert_eps: f64,
    /// Receiver noise power at each unscheduled user.
    pub usu_noise_w: f64,
    /// Channel power gain at 1 m.
    pub ref_gain: f64,
}

/// A validated, immutable problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    users: Vec<GroundUser>,
    uav: UavParams,
    grid: TimeGrid,
    rc: ReliabilityCovertness,
    // Row-major K x K cache of inter-user fading by user index; diagonal unused.
    fading: Vec<f64>,
}

impl Scenario {
    pub fn new(
        users: Vec<GroundUser>,
        uav: UavParams,
        grid: TimeGrid,
        rc: ReliabilityCovertness,
    ) -> Result<Self> {
        let k = users.len();
        if k < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 ground users so an unscheduled user exists, got {k}"
            )));
        }
        let ids: BTreeSet<u32> = users.iter().map(|u| u.id).collect();
        if ids.len() != k {
            return Err(Error::Validation("user ids must be distinct".into()));
        }
        for u in &users {
            if !u.position.is_finite() {
                return Err(Error::Validation(format!("user {}: position is not finite", u.id)));
            }
            if !(u.tx_power_w > 0.0 && u.tx_power_w.is_finite()) {
                return Err(Error::Validation(format!("user {}: tx power must be positive", u.id)));
            }
        }
        check_positive("altitude_m", uav.altitude_m)?;
        check_positive("v_max_mps", uav.v_max_mps)?;
        check_positive("p_max_an", uav.p_max_an_w)?;
        check_positive("lambda_uu", uav.self_interference_fading)?;
        check_positive("uav noise", uav.rx_noise_w)?;
        if !(0.0..=1.0).contains(&uav.self_interference_rho) {
            return Err(Error::Validation(format!(
                "rho must lie in [0, 1], got {}",
                uav.self_interference_rho
            )));
        }
        if !(rc.outage_eps > 0.0 && rc.outage_eps < 1.0) {
            return Err(Error::Validation(format!(
                "outage_eps must lie in (0, 1), got {}",
                rc.outage_eps
            )));
        }
        if !(rc.covert_eps > 0.0 && rc.covert_eps < 1.0) {
            return Err(Error::Validation(format!(
                "covert_eps must lie in (0, 1), got {}",
                rc.covert_eps
            )));
        }
        check_positive("usu noise", rc.usu_noise_w)?;
        check_positive("ref_gain", rc.ref_gain)?;
        if grid.n_slots < 2 || grid.slot_s.is_nan() || grid.slot_s <= 0.0 {
            return Err(Error::Validation("time grid needs N >= 2 and a positive slot".into()));
        }
        if (grid.n_slots as f64 * grid.slot_s - grid.period_s).abs() > 1e-9 * grid.period_s {
            return Err(Error::Validation("time grid must satisfy T = N * slot".into()));
        }

        let mut fading = vec![0.0; k * k];
        for (a, ua) in users.iter().enumerate() {
            for (b, ub) in users.iter().enumerate() {
                if a == b {
                    continue;
                }
                let lam = *ua.inter_user_fading.get(&ub.id).ok_or_else(|| {
                    Error::Validation(format!("user {}: missing fading to peer {}", ua.id, ub.id))
                })?;
                if !(lam > 0.0 && lam.is_finite()) {
                    return Err(Error::Validation(format!(
                        "user {}: fading to peer {} must be positive",
                        ua.id, ub.id
                    )));
                }
                fading[a * k + b] = lam;
            }
            if let Some(extra) = ua.inter_user_fading.keys().find(|id| !ids.contains(id) || **id == ua.id) {
                return Err(Error::Validation(format!(
                    "user {}: fading entry for unknown or self peer {extra}",
                    ua.id
                )));
            }
        }
        Ok(Self { users, uav, grid, rc, fading })
    }

    /// Reads and validates a JSON scenario file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.to_scenario()
    }

    pub fn users(&self) -> &[GroundUser] {
        &self.users
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn uav(&self) -> &UavParams {
        &self.uav
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rc(&self) -> &ReliabilityCovertness {
        &self.rc
    }

    pub fn position(&self, k: usize) -> Point {
        self.users[k].position
    }

    /// Mean channel power from user index `k` to user index `m`.
    pub fn fading(&self, k: usize, m: usize) -> f64 {
        debug_assert_ne!(k, m);
        self.fading[k * self.users.len() + m]
    }

    /// Index of the user with the given id.
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.users.iter().position(|u| u.id == id)
    }

    pub fn center(&self) -> Point {
        geometric_center(&self.users)
    }

    /// Maximum step length between consecutive waypoints.
    pub fn step_limit(&self) -> f64 {
        self.grid.step_limit(self.uav.v_max_mps)
    }

    /// `-rho * lambda_uu * ln(outage_eps)`: received self-interference per
    /// watt of AN at the outage-limited operating point.
    pub fn self_interference_per_watt(&self) -> f64 {
        -self.uav.self_interference_rho * self.uav.self_interference_fading * self.rc.outage_eps.ln()
    }

    pub fn with_covert_eps(&self, covert_eps: f64) -> Result<Self> {
        let mut rc = self.rc;
        rc.covert_eps = covert_eps;
        Self::new(self.users.clone(), self.uav, self.grid, rc)
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        let mut uav = self.uav;
        uav.self_interference_rho = rho;
        Self::new(self.users.clone(), uav, self.grid, self.rc)
    }

    /// Same scenario with a different flight period and unchanged slot length.
    pub fn with_period(&self, period_s: f64) -> Result<Self> {
        let grid = TimeGrid::new(period_s, self.grid.slot_s)?;
        Self::new(self.users.clone(), self.uav, grid, self.rc)
    }

    pub fn with_slot(&self, slot_s: f64) -> Result<Self> {
        let grid = TimeGrid::new(self.grid.period_s, slot_s)?;
        Self::new(self.users.clone(), self.uav, grid, self.rc)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `w0 = (sum_k w_k) / K`.
pub fn geometric_center(users: &[GroundUser]) -> Point {
    center_of(users.iter().map(|u| u.position))
}

pub(crate) fn center_of(points: impl ExactSizeIterator<Item = Point>) -> Point {
    let n = points.len() as f64;
    let sum = points.fold(Point::default(), |acc, p| acc + p);
    sum * (1.0 / n)
}

// ---------------------------------------------------------------------------
// On-disk schema
// ---------------------------------------------------------------------------

/// JSON scenario schema. Power-like quantities are in dB / dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub users: Vec<UserSpec>,
    pub uav: UavSpec,
    pub grid: GridSpec,
    pub constraints: ConstraintSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub id: u32,
    pub xy_m: [f64; 2],
    pub tx_power_dbm: f64,
    pub fading_db: FadingSpec,
}

/// Either an explicit per-peer table (peer id -> dB) or the string
/// `"auto_pathloss"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FadingSpec {
    Keyword(String),
    PerPeer(BTreeMap<String, f64>),
}

impl FadingSpec {
    pub fn auto() -> Self {
        FadingSpec::Keyword("auto_pathloss".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    pub altitude_m: f64,
    pub v_max_mps: f64,
    pub p_max_an_dbm: f64,
    pub rho_db: f64,
    pub lambda_uu_db: f64,
    pub noise_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub period_s: f64,
    pub slot_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub outage_eps: f64,
    pub covert_eps: f64,
    pub usu_noise_dbm: f64,
    pub ref_gain_db: f64,
    /// Exponent for `"auto_pathloss"` fading entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_pathloss_exponent: Option<f64>,
}

impl ScenarioFile {
    /// The four-user reference instance: users at (±200, 0) and (0, ±120),
    /// 30 dBm users, 36 dBm AN cap, 6 m/s, 100 m altitude, 1 s slots,
    /// T = 240 s, outage 0.05 and covertness slack 0.03.
    pub fn reference() -> Self {
        let xy = [[200.0, 0.0], [0.0, 120.0], [-200.0, 0.0], [0.0, -120.0]];
        ScenarioFile {
            users: xy
                .iter()
                .enumerate()
                .map(|(i, p)| UserSpec {
                    id: i as u32 + 1,
                    xy_m: *p,
                    tx_power_dbm: 30.0,
                    fading_db: FadingSpec::auto(),
                })
                .collect(),
            uav: UavSpec {
                altitude_m: 100.0,
                v_max_mps: 6.0,
                p_max_an_dbm: 36.0,
                rho_db: -60.0,
                lambda_uu_db: -60.0,
                noise_dbm: -110.0,
            },
            grid: GridSpec { period_s: 240.0, slot_s: 1.0 },
            constraints: ConstraintSpec {
                outage_eps: 0.05,
                covert_eps: 0.03,
                usu_noise_dbm: -110.0,
                ref_gain_db: -60.0,
                ground_pathloss_exponent: None,
            },
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario file serializes")
    }

    /// Converts to SI units and validates.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let ref_gain = db_to_linear(self.constraints.ref_gain_db);
        let exponent = self
            .constraints
            .ground_pathloss_exponent
            .unwrap_or(DEFAULT_GROUND_PATHLOSS_EXPONENT);
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::Validation(format!(
                "ground_pathloss_exponent must be positive, got {exponent}"
            )));
        }
        let mut users = Vec::with_capacity(self.users.len());
        for spec in &self.users {
            let position = Point::from(spec.xy_m);
            let inter_user_fading = match &spec.fading_db {
                FadingSpec::Keyword(k) if k == "auto_pathloss" => self
                    .users
                    .iter()
                    .filter(|peer| peer.id != spec.id)
                    .map(|peer| {
                        let lam = pathloss_fading(ref_gain, exponent, position, Point::from(peer.xy_m));
                        (peer.id, lam)
                    })
                    .collect(),
                FadingSpec::Keyword(k) => {
                    return Err(Error::Validation(format!(
                        "user {}: unknown fading keyword {k:?} (expected \"auto_pathloss\")",
                        spec.id
                    )))
                }
                FadingSpec::PerPeer(table) => {
                    let mut out = BTreeMap::new();
                    for (peer, db) in table {
                        let peer_id: u32 = peer.parse().map_err(|_| {
                            Error::Validation(format!("user {}: fading key {peer:?} is not a user id", spec.id))
                        })?;
                        out.insert(peer_id, db_to_linear(*db));
                    }
                    out
                }
            };
            users.push(GroundUser {
                id: spec.id,
                position,
                tx_power_w: dbm_to_watts(spec.tx_power_dbm),
                inter_user_fading,
            });
        }
        let uav = UavParams {
            altitude_m: self.uav.altitude_m,
            v_max_mps: self.uav.v_max_mps,
            p_max_an_w: dbm_to_watts(self.uav.p_max_an_dbm),
            self_interference_rho: db_to_linear(self.uav.rho_db),
            self_interference_fading: db_to_linear(self.uav.lambda_uu_db),
            rx_noise_w: dbm_to_watts(self.uav.noise_dbm),
        };
        let grid = TimeGrid::new(self.grid.period_s, self.grid.slot_s)?;
        let rc = ReliabilityCovertness {
            outage_eps: self.constraints.outage_eps,
            covert_eps: self.constraints.covert_eps,
            usu_noise_w: dbm_to_watts(self.constraints.usu_noise_dbm),
            ref_gain,
        };
        Scenario::new(users, uav, grid, rc)
    }
}
