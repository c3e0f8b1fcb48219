//! Radiometer detection at an unscheduled user (the warden).
//!
//! Under the infinite-sample statistic the warden observes
//! `T = P_u |h_um|^2 + sigma^2` when nobody transmits and
//! `T = P_u |h_um|^2 + P_k |g_km|^2 + sigma^2` when user `k` does. With
//! `P_u` uniform on `[0, P_umax]` the first term is uniform on `[0, rho]`
//! where `rho = P_umax |h_um|^2`, and the second is exponential with mean
//! `P_k lambda_km`. Everything below is a closed form in those three numbers.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::channel::los_gain;
use crate::geom::Point;
use crate::rng;
use crate::scenario::Scenario;

/// Statistics of one (scheduled user, warden) pair in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorGeometry {
    /// Maximum AN power received by the warden, watts.
    pub rho_um: f64,
    /// Mean power of the scheduled user's signal at the warden, watts.
    pub pk_lambda: f64,
    /// Warden noise power, watts.
    pub sigma_m_sq: f64,
}

/// Error rates of one detector at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    pub false_alarm: f64,
    pub miss: f64,
    pub total: f64,
}

/// Optimal radiometer threshold and the error it achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalDetector {
    pub threshold: f64,
    pub min_error: f64,
}

/// `(1 - e^{-r}) / r`, continuous at `r = 0`.
fn one_minus_exp_over(r: f64) -> f64 {
    if r < 1e-12 {
        1.0 - 0.5 * r
    } else {
        -(-r).exp_m1() / r
    }
}

impl DetectorGeometry {
    pub fn new(rho_um: f64, pk_lambda: f64, sigma_m_sq: f64) -> Self {
        debug_assert!(rho_um >= 0.0 && pk_lambda > 0.0 && sigma_m_sq > 0.0);
        DetectorGeometry { rho_um, pk_lambda, sigma_m_sq }
    }

    /// Warden `m` watching user `k` while the UAV at `q` caps AN at `p_umax`.
    pub fn from_scenario(s: &Scenario, k: usize, m: usize, q: Point, p_umax: f64) -> Self {
        let h = los_gain(q, s.position(m), s.uav().altitude_m, s.rc().ref_gain).value();
        DetectorGeometry::new(p_umax * h, s.users()[k].tx_power_w * s.fading(k, m), s.rc().usu_noise_w)
    }

    /// `P(T >= tau | nobody transmits)`.
    pub fn false_alarm(&self, tau: f64) -> f64 {
        let excess = tau - self.sigma_m_sq;
        if excess <= 0.0 {
            1.0
        } else if excess <= self.rho_um {
            1.0 - excess / self.rho_um
        } else {
            0.0
        }
    }

    /// Density of the uniform-plus-exponential sum at `z`.
    pub fn sum_pdf(&self, z: f64) -> f64 {
        let (rho, mean) = (self.rho_um, self.pk_lambda);
        if z <= 0.0 {
            0.0
        } else if rho == 0.0 {
            (-z / mean).exp() / mean
        } else if z <= rho {
            -(-z / mean).exp_m1() / rho
        } else {
            (-(z - rho) / mean).exp() * -(-rho / mean).exp_m1() / rho
        }
    }

    /// `P(T <= tau | user k transmits)`.
    pub fn miss_detection(&self, tau: f64) -> f64 {
        let excess = tau - self.sigma_m_sq;
        let (rho, mean) = (self.rho_um, self.pk_lambda);
        if excess <= 0.0 {
            0.0
        } else if excess <= rho {
            excess / rho - (mean / rho) * -(-excess / mean).exp_m1()
        } else {
            let ratio = one_minus_exp_over(rho / mean);
            1.0 - (-(excess - rho) / mean).exp() * ratio
        }
    }

    pub fn detection_error(&self, tau: f64) -> DetectionOutcome {
        let false_alarm = self.false_alarm(tau);
        let miss = self.miss_detection(tau);
        DetectionOutcome { false_alarm, miss, total: false_alarm + miss }
    }

    /// Threshold `rho + sigma^2` and the minimum error there. A silent UAV
    /// (`rho = 0`) gives the continuous limit: threshold `sigma^2`, error 0.
    pub fn optimal(&self) -> OptimalDetector {
        OptimalDetector {
            threshold: self.rho_um + self.sigma_m_sq,
            min_error: 1.0 - xi_bar_of_ratio(self.pk_lambda / self.rho_um),
        }
    }
}

/// `t (1 - e^{-1/t})`, i.e. one minus the minimum detection error when the
/// ratio of mean signal power to peak AN power at the warden is `t`.
/// Increasing in `t`, from 0 at `t = 0` to 1 as `t -> inf`.
pub fn xi_bar_of_ratio(t: f64) -> f64 {
    if t.is_infinite() {
        1.0
    } else if t <= 0.0 {
        0.0
    } else {
        one_minus_exp_over(1.0 / t)
    }
}

/// Ratio `t = (||q - w_m||^2 + H^2) / (beta_bar P)` with
/// `beta_bar = beta0 / (P_k lambda_km)`.
pub fn covert_ratio(q: Point, w_m: Point, altitude: f64, p_umax: f64, beta_bar: f64) -> f64 {
    (q.dist_sq(w_m) + altitude * altitude) / (beta_bar * p_umax)
}

/// One minus the minimum detection error of warden `w_m`, written in the
/// trajectory and power variables.
pub fn xi_bar(q: Point, w_m: Point, altitude: f64, p_umax: f64, beta_bar: f64) -> f64 {
    xi_bar_of_ratio(covert_ratio(q, w_m, altitude, p_umax, beta_bar))
}

/// `beta0 / (P_k lambda_km)` for scheduled user `k` and warden `m`.
pub fn beta_bar(s: &Scenario, k: usize, m: usize) -> f64 {
    s.rc().ref_gain / (s.users()[k].tx_power_w * s.fading(k, m))
}

/// Smallest minimum detection error over all wardens of user `k`, and the
/// index of the warden attaining it.
pub fn strongest_warden(s: &Scenario, k: usize, q: Point, p_umax: f64) -> (f64, usize) {
    (0..s.n_users())
        .filter(|&m| m != k)
        .map(|m| (DetectorGeometry::from_scenario(s, k, m, q, p_umax).optimal().min_error, m))
        .fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 { b } else { a })
}

/// One warden as seen by the power inversion: squared slant range `u` and
/// mean received signal power `P_k lambda_km`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Warden {
    pub slant_sq: f64,
    pub pk_lambda: f64,
}

/// Smallest AN cap in `[0, p_cap]` for which every warden's minimum
/// detection error is at least `1 - covert_eps`, or `None` if `p_cap` is
/// not enough. Bisection to relative `1e-10`; the feasible end is returned.
pub fn min_covert_power_for(wardens: &[Warden], ref_gain: f64, covert_eps: f64, p_cap: f64) -> Option<f64> {
    let target = 1.0 - covert_eps;
    let worst = |p: f64| {
        wardens
            .iter()
            .map(|w| DetectorGeometry::new(p * ref_gain / w.slant_sq, w.pk_lambda, 1.0).optimal().min_error)
            .fold(f64::INFINITY, f64::min)
    };
    if worst(p_cap) < target {
        return None;
    }
    let (mut lo, mut hi) = (0.0, p_cap);
    for _ in 0..2000 {
        if hi - lo <= 1e-10 * hi || hi <= f64::MIN_POSITIVE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if worst(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// [`min_covert_power_for`] for user `k` scheduled with the UAV above `q`.
pub fn min_covert_power(s: &Scenario, k: usize, q: Point, covert_eps: f64, p_cap: f64) -> Option<f64> {
    let h2 = s.uav().altitude_m.powi(2);
    let wardens: Vec<Warden> = (0..s.n_users())
        .filter(|&m| m != k)
        .map(|m| Warden { slant_sq: q.dist_sq(s.position(m)) + h2, pk_lambda: s.users()[k].tx_power_w * s.fading(k, m) })
        .collect();
    min_covert_power_for(&wardens, s.rc().ref_gain, covert_eps, p_cap)
}

/// Empirical false-alarm and miss rates of threshold `tau` from
/// `n_samples` draws of the statistic under each hypothesis.
pub fn mc_detection(g: &DetectorGeometry, tau: f64, n_samples: u64, seed: u64) -> (f64, f64) {
    assert!(n_samples >= 1);
    let exp = Exp::new(1.0 / g.pk_lambda).expect("positive mean");
    let false_alarms = rng::blocked_count(seed, "detection/h0", n_samples, |r, len| {
        (0..len).filter(|_| r.random::<f64>() * g.rho_um + g.sigma_m_sq >= tau).count() as u64
    });
    let misses = rng::blocked_count(seed, "detection/h1", n_samples, |r, len| {
        (0..len)
            .filter(|_| {
                let an = r.random::<f64>() * g.rho_um;
                an + exp.sample(r) + g.sigma_m_sq <= tau
            })
            .count() as u64
    });
    (false_alarms as f64 / n_samples as f64, misses as f64 / n_samples as f64)
}
