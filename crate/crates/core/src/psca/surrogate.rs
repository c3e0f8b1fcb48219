//! Tangent bounds that make the rate and covertness constraints convex.
//!
//! The covert rate is `log2(1 + a / (x1 x2))` with `x1 = ||q - w_k||^2 + H^2`
//! and `x2 = c1 P + sigma^2`, a jointly convex function of `(x1, x2)`, so its
//! tangent plane is a global lower bound that is concave (affine in
//! `||q - w_k||^2` and `P`). One minus the detection error, `t (1 - e^{-1/t})`,
//! is concave in the ratio `t = x1' / (beta_bar P)`, so its tangent line is a
//! global upper bound with a nonnegative slope.

use crate::channel::Uplink;
use crate::detection::{beta_bar, covert_ratio, xi_bar_of_ratio};
use crate::geom::Point;
use crate::scenario::Scenario;

/// `R_lo(q, P) = value - dist_coef (||q - w||^2 - dist_sq_ref) - power_coef (P - power_ref)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSurrogate {
    pub user: Point,
    pub value: f64,
    /// Per square meter, nonnegative.
    pub dist_coef: f64,
    /// Per watt, nonnegative.
    pub power_coef: f64,
    pub dist_sq_ref: f64,
    pub power_ref: f64,
}

impl RateSurrogate {
    pub fn eval(&self, q: Point, p: f64) -> f64 {
        self.value - self.dist_coef * (q.dist_sq(self.user) - self.dist_sq_ref) - self.power_coef * (p - self.power_ref)
    }

    /// The bound as `constant - dist_coef ||q - w||^2 - power_coef P`.
    pub fn constant(&self) -> f64 {
        self.value + self.dist_coef * self.dist_sq_ref + self.power_coef * self.power_ref
    }

    /// Gradient with respect to `(q.x, q.y, P)`.
    pub fn gradient(&self, q: Point) -> [f64; 3] {
        let d = q - self.user;
        [-2.0 * self.dist_coef * d.x, -2.0 * self.dist_coef * d.y, -self.power_coef]
    }
}

/// Tangent lower bound of user `k`'s covert rate at `(q_ref, p_ref)`.
pub fn rate_lower_bound(s: &Scenario, k: usize, q_ref: Point, p_ref: f64) -> RateSurrogate {
    let w = s.position(k);
    let h2 = s.uav().altitude_m.powi(2);
    let a = s.rc().ref_gain * s.users()[k].tx_power_w;
    let c1 = s.self_interference_per_watt();
    let dist_sq_ref = q_ref.dist_sq(w);
    let x1 = dist_sq_ref + h2;
    let x2 = c1 * p_ref + s.uav().rx_noise_w;
    let common = a / ((x1 * x2 + a) * std::f64::consts::LN_2);
    RateSurrogate {
        user: w,
        value: Uplink::from_scenario(s, k, q_ref).covert_rate(p_ref, s.rc().outage_eps),
        dist_coef: common / x1,
        power_coef: common * c1 / x2,
        dist_sq_ref,
        power_ref: p_ref,
    }
}

/// Tangent upper bound of `t (1 - e^{-1/t})` at `t_ref`:
/// `value + slope (t - t_ref)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovertSurrogate {
    pub warden: Point,
    pub altitude: f64,
    pub beta_bar: f64,
    pub ratio_ref: f64,
    pub value: f64,
    pub slope: f64,
}

impl CovertSurrogate {
    pub fn ratio(&self, q: Point, p: f64) -> f64 {
        covert_ratio(q, self.warden, self.altitude, p, self.beta_bar)
    }

    pub fn eval(&self, q: Point, p: f64) -> f64 {
        self.value + self.slope * (self.ratio(q, p) - self.ratio_ref)
    }

    /// `1 - value + slope * ratio_ref`: the surrogate constraint
    /// `eval <= 1 - omega` reads `slope * ratio <= offset - omega`.
    pub fn offset(&self) -> f64 {
        1.0 - self.value + self.slope * self.ratio_ref
    }
}

/// `d/dt [t (1 - e^{-1/t})] = 1 - e^{-1/t} (1 + 1/t)`, nonnegative.
pub fn xi_bar_slope(t: f64) -> f64 {
    let y = 1.0 / t;
    if y < 1e-3 {
        y * y * (0.5 - y / 3.0 + y * y / 8.0 - y * y * y / 30.0)
    } else {
        -(-y).exp_m1() - y * (-y).exp()
    }
}

/// Tangent upper bound for warden `m` watching user `k` at `(q_ref, p_ref)`.
pub fn xi_upper_bound(s: &Scenario, k: usize, m: usize, q_ref: Point, p_ref: f64) -> CovertSurrogate {
    assert!(p_ref > 0.0, "expansion power must be positive");
    let bb = beta_bar(s, k, m);
    let warden = s.position(m);
    let altitude = s.uav().altitude_m;
    let t = covert_ratio(q_ref, warden, altitude, p_ref, bb);
    CovertSurrogate { warden, altitude, beta_bar: bb, ratio_ref: t, value: xi_bar_of_ratio(t), slope: xi_bar_slope(t) }
}
