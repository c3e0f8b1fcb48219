//! Oracle suites that check the closed forms against independent evidence:
//! Monte Carlo sampling, brute-force threshold search, quadrature and
//! finite differences.
//!
//! Every suite is deterministic in its seed and returns one [`Check`] per
//! comparison, so callers can print margins or assert on them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{binomial_std_err, Uplink};
use crate::detection::{beta_bar, mc_detection, xi_bar, DetectorGeometry};
use crate::geom::Point;
use crate::psca::{rate_lower_bound, xi_upper_bound};
use crate::quadrature::adaptive_simpson;
use crate::rng::substream;
use crate::scenario::Scenario;

/// Outcome of one comparison. `value` is the observed discrepancy and
/// `limit` the allowed one; the check passes when `value <= limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, passed: value <= limit }
    }

    /// `limit - value`; negative when the check fails.
    pub fn margin(&self) -> f64 {
        self.limit - self.value
    }
}

/// Detector geometry drawn over the range the optimizer visits: noise near
/// `1e-14` W, peak AN at the warden over four decades, and signal-to-AN
/// ratios between 1/20 and 20.
pub fn random_geometry<R: Rng>(rng: &mut R) -> DetectorGeometry {
    let sigma = 1e-14 * 10f64.powf(rng.random_range(-0.3..0.3));
    let rho = 10f64.powf(rng.random_range(-15.0..-11.0));
    let pk_lambda = rho * 10f64.powf(rng.random_range(-1.3..1.3));
    DetectorGeometry::new(rho, pk_lambda, sigma)
}

/// Integral of the sum density over `[0, rho + 40 pk_lambda]`, split at the kink.
pub fn pdf_mass(g: &DetectorGeometry) -> f64 {
    let f = |z: f64| g.sum_pdf(z);
    let end = g.rho_um + 40.0 * g.pk_lambda;
    adaptive_simpson(&f, 0.0, g.rho_um, 1e-10) + adaptive_simpson(&f, g.rho_um, end, 1e-10)
}

/// Brute-force minimum of `false_alarm + miss` over `points` thresholds
/// evenly spaced on `[sigma^2, sigma^2 + 10 rho]`: `(min error, argmin, step)`.
pub fn grid_minimum(g: &DetectorGeometry, points: usize) -> (f64, f64, f64) {
    let step = 10.0 * g.rho_um / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let tau = g.sigma_m_sq + step * i as f64;
            (g.detection_error(tau).total, tau)
        })
        .fold((f64::INFINITY, f64::NAN, step), |best, (e, tau)| if e < best.0 { (e, tau, step) } else { best })
}

/// Closed-form detection rates against sampling, the density against
/// quadrature, and the optimal threshold against a grid search, on
/// `geometries` random detectors.
pub fn detection_suite(seed: u64, samples: u64, geometries: usize) -> Vec<Check> {
    let mut checks = Vec::new();
    for i in 0..geometries {
        let mut rng = substream(seed, "validate/detection", i as u64);
        let g = random_geometry(&mut rng);
        let tau = g.sigma_m_sq + rng.random_range(0.0..1.0) * (g.rho_um + 2.0 * g.pk_lambda);
        let exact = g.detection_error(tau);
        let (alpha, beta) = mc_detection(&g, tau, samples, seed.wrapping_add(i as u64));
        let se_a = binomial_std_err(exact.false_alarm, samples);
        let se_b = binomial_std_err(exact.miss, samples);
        // Degenerate branches have zero variance; allow one sample of slack.
        let floor = 1.0 / samples as f64;
        checks.push(Check::new(format!("geometry {i}: false alarm vs sampling"), (alpha - exact.false_alarm).abs(), 3.0 * se_a + floor));
        checks.push(Check::new(format!("geometry {i}: miss vs sampling"), (beta - exact.miss).abs(), 3.0 * se_b + floor));
        checks.push(Check::new(
            format!("geometry {i}: total error vs sampling"),
            (alpha + beta - exact.total).abs(),
            3.0 * (se_a * se_a + se_b * se_b).sqrt() + floor,
        ));

        checks.push(Check::new(format!("geometry {i}: density mass"), (pdf_mass(&g) - 1.0).abs(), 1e-9));

        let opt = g.optimal();
        let (grid_min, argmin, step) = grid_minimum(&g, 10_000);
        checks.push(Check::new(format!("geometry {i}: grid minimum vs closed form"), (grid_min - opt.min_error).abs(), 1e-3));
        checks.push(Check::new(format!("geometry {i}: grid argmin vs optimal threshold"), (argmin - opt.threshold).abs(), step * (1.0 + 1e-9)));
    }
    checks
}

fn random_point<R: Rng>(rng: &mut R) -> Point {
    Point::new(rng.random_range(-400.0..400.0), rng.random_range(-400.0..400.0))
}

/// Log-uniform over six decades below the cap.
fn random_power<R: Rng>(rng: &mut R, cap: f64) -> f64 {
    cap * 10f64.powf(rng.random_range(-6.0..0.0))
}

/// Tangency, global bounding and gradients of the rate and covertness
/// surrogates on `draws` random expansion and evaluation points of `s`.
pub fn bounds_suite(s: &Scenario, seed: u64, draws: usize) -> Vec<Check> {
    let cap = s.uav().p_max_an_w;
    let eps = s.rc().outage_eps;
    let k_users = s.n_users();
    let h = s.uav().altitude_m;
    let rate = |k: usize, q: Point, p: f64| Uplink::from_scenario(s, k, q).covert_rate(p, eps);
    let mut rng = substream(seed, "validate/bounds", 0);

    let (mut tangency, mut slack, mut gradient, mut negative_coef) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..draws {
        let k = rng.random_range(0..k_users);
        let (q_ref, p_ref) = (random_point(&mut rng), random_power(&mut rng, cap));
        let (q, p) = (random_point(&mut rng), random_power(&mut rng, cap));
        let lb = rate_lower_bound(s, k, q_ref, p_ref);
        tangency = tangency.max((lb.eval(q_ref, p_ref) - rate(k, q_ref, p_ref)).abs());
        slack = slack.min(rate(k, q, p) - lb.eval(q, p));
        negative_coef = negative_coef.max(-lb.dist_coef).max(-lb.power_coef);

        let g = lb.gradient(q_ref);
        let (hq, hp) = (1e-4 * 100.0, 1e-4 * p_ref);
        let dx = Point::new(hq, 0.0);
        let dy = Point::new(0.0, hq);
        let fd = [
            (rate(k, q_ref + dx, p_ref) - rate(k, q_ref - dx, p_ref)) / (2.0 * hq),
            (rate(k, q_ref + dy, p_ref) - rate(k, q_ref - dy, p_ref)) / (2.0 * hq),
            (rate(k, q_ref, p_ref + hp) - rate(k, q_ref, p_ref - hp)) / (2.0 * hp),
        ];
        let scale = fd.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            for i in 0..3 {
                gradient = gradient.max((g[i] - fd[i]).abs() / scale);
            }
        }
    }
    let mut checks = vec![
        Check::new("rate bound: tangency", tangency, 1e-12),
        Check::new("rate bound: never above the rate", -slack, 1e-9),
        Check::new("rate bound: gradient vs finite differences (relative)", gradient, 1e-4),
        Check::new("rate bound: nonnegative coefficients", negative_coef, 0.0),
    ];

    let (mut tangency, mut slack, mut negative_slope, mut slope_err) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..draws {
        let k = rng.random_range(0..k_users);
        let m = (k + rng.random_range(1..k_users)) % k_users;
        let bb = beta_bar(s, k, m);
        let w = s.position(m);
        let (q_ref, p_ref) = (random_point(&mut rng), random_power(&mut rng, cap));
        let (q, p) = (random_point(&mut rng), random_power(&mut rng, cap));
        let ub = xi_upper_bound(s, k, m, q_ref, p_ref);
        tangency = tangency.max((ub.eval(q_ref, p_ref) - xi_bar(q_ref, w, h, p_ref, bb)).abs());
        slack = slack.min(ub.eval(q, p) - xi_bar(q, w, h, p, bb));
        negative_slope = negative_slope.max(-ub.slope);

        // The slope is d xi_bar / d ratio; probe the ratio through P.
        let hp = 1e-4 * p_ref;
        let (r_hi, r_lo) = (ub.ratio(q_ref, p_ref - hp), ub.ratio(q_ref, p_ref + hp));
        let fd = (xi_bar(q_ref, w, h, p_ref - hp, bb) - xi_bar(q_ref, w, h, p_ref + hp, bb)) / (r_hi - r_lo);
        if fd.abs() > 1e-300 {
            slope_err = slope_err.max((ub.slope - fd).abs() / fd.abs());
        }
    }
    checks.extend([
        Check::new("covertness bound: tangency", tangency, 1e-12),
        Check::new("covertness bound: never below the exact value", -slack, 1e-9),
        Check::new("covertness bound: nonnegative slope", negative_slope, 0.0),
        Check::new("covertness bound: slope vs finite differences (relative)", slope_err, 1e-4),
    ]);
    checks
}

/// Sampled outage at the covert rate against the target `outage_eps`, on
/// `configurations` random UAV positions, users and AN caps of `s`.
pub fn outage_suite(s: &Scenario, seed: u64, samples: u64, configurations: usize) -> Vec<Check> {
    let eps = s.rc().outage_eps;
    let cap = s.uav().p_max_an_w;
    let mut checks = Vec::new();
    for i in 0..configurations {
        let mut rng = substream(seed, "validate/outage", i as u64);
        let k = rng.random_range(0..s.n_users());
        let q = random_point(&mut rng);
        let p = cap * rng.random_range(1e-3..1.0);
        let link = Uplink::from_scenario(s, k, q);
        let r = link.covert_rate(p, eps);
        checks.push(Check::new(format!("configuration {i}: closed-form outage at the covert rate"), (link.outage_bound(p, r) - eps).abs(), 1e-12));
        let empirical = link.mc_outage(p, r, samples, seed.wrapping_add(i as u64));
        checks.push(Check::new(
            format!("configuration {i}: sampled outage vs target"),
            (empirical - eps).abs(),
            3.0 * binomial_std_err(eps, samples),
        ));
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioFile;

    #[test]
    fn suites_pass_at_small_sizes() {
        let s = ScenarioFile::reference().to_scenario().unwrap();
        let all: Vec<Check> = detection_suite(7, 20_000, 3)
            .into_iter()
            .chain(bounds_suite(&s, 7, 50))
            .chain(outage_suite(&s, 7, 20_000, 2))
            .collect();
        for c in &all {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn suites_are_deterministic() {
        assert_eq!(detection_suite(3, 5_000, 2), detection_suite(3, 5_000, 2));
    }
}
