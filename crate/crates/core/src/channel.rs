//! Line-of-sight uplink model: channel gain, outage-constrained covert
//! rate, the worst-case outage bound and a Monte Carlo outage oracle.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::geom::Point;
use crate::rng;
use crate::scenario::Scenario;

/// Squared magnitude of a ground-to-UAV channel, `|h|^2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LinkGain(pub f64);

impl LinkGain {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `beta0 / (||q - w||^2 + H^2)`. Symmetric in `q` and `w`.
pub fn los_gain(q: Point, w: Point, altitude: f64, ref_gain: f64) -> LinkGain {
    LinkGain(ref_gain / (q.dist_sq(w) + altitude * altitude))
}

/// One joint draw of the random quantities in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDraw {
    /// `|g_uu|^2`, exponential with mean `lambda_uu`.
    pub g_uu_sq: f64,
    /// `|g_km|^2`, exponential with mean `lambda_km`.
    pub g_km_sq: f64,
    /// AN power, uniform on `[0, p_umax]`.
    pub p_u: f64,
}

impl FadingDraw {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, lambda_uu: f64, lambda_km: f64, p_umax: f64) -> Self {
        let uu = Exp::new(1.0 / lambda_uu).expect("positive mean");
        let km = Exp::new(1.0 / lambda_km).expect("positive mean");
        FadingDraw { g_uu_sq: uu.sample(rng), g_km_sq: km.sample(rng), p_u: rng.random::<f64>() * p_umax }
    }
}

/// Parameters of the link from one scheduled user to the full-duplex UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uplink {
    pub tx_power_w: f64,
    pub gain: LinkGain,
    /// Self-interference cancellation coefficient.
    pub rho: f64,
    pub lambda_uu: f64,
    pub noise_w: f64,
}

impl Uplink {
    /// Uplink of user index `k` with the UAV above `q`.
    pub fn from_scenario(s: &Scenario, k: usize, q: Point) -> Self {
        Uplink {
            tx_power_w: s.users()[k].tx_power_w,
            gain: los_gain(q, s.position(k), s.uav().altitude_m, s.rc().ref_gain),
            rho: s.uav().self_interference_rho,
            lambda_uu: s.uav().self_interference_fading,
            noise_w: s.uav().rx_noise_w,
        }
    }

    fn received(&self) -> f64 {
        self.tx_power_w * self.gain.0
    }

    /// Rate at which the outage bound equals `outage_eps`:
    /// `log2(1 + P_k |h|^2 / (-rho P_umax lambda_uu ln(eps) + sigma^2))`.
    pub fn covert_rate(&self, p_umax: f64, outage_eps: f64) -> f64 {
        let interference = -self.rho * p_umax * self.lambda_uu * outage_eps.ln() + self.noise_w;
        (self.received() / interference).ln_1p() / std::f64::consts::LN_2
    }

    /// Instantaneous capacity for a given AN power and self-interference draw.
    pub fn capacity(&self, p_u: f64, g_uu_sq: f64) -> f64 {
        (self.received() / (self.rho * p_u * g_uu_sq + self.noise_w)).ln_1p() / std::f64::consts::LN_2
    }

    /// Outage probability bound at AN power `p_umax` for target `rate`,
    /// clamped to `[0, 1]`.
    pub fn outage_bound(&self, p_umax: f64, rate: f64) -> f64 {
        let snr_threshold = (rate * std::f64::consts::LN_2).exp_m1();
        let excess = self.received() / snr_threshold - self.noise_w;
        let v = (-excess / (self.rho * p_umax * self.lambda_uu)).exp();
        v.clamp(0.0, 1.0)
    }

    /// Fraction of `n_samples` self-interference draws (AN fixed at
    /// `p_umax`) whose capacity falls below `rate`.
    pub fn mc_outage(&self, p_umax: f64, rate: f64, n_samples: u64, seed: u64) -> f64 {
        assert!(n_samples >= 1);
        let exp = Exp::new(1.0 / self.lambda_uu).expect("positive mean");
        let hits = rng::blocked_count(seed, "channel/outage", n_samples, |r, len| {
            (0..len).filter(|_| self.capacity(p_umax, exp.sample(r)) < rate).count() as u64
        });
        hits as f64 / n_samples as f64
    }
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_std_err(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioFile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference_link() -> (Uplink, f64) {
        let s = ScenarioFile::reference().to_scenario().unwrap();
        (Uplink::from_scenario(&s, 0, s.position(0)), s.uav().p_max_an_w)
    }

    #[test]
    fn overhead_gain() {
        let g = los_gain(Point::new(3.0, 4.0), Point::new(3.0, 4.0), 100.0, 1e-6);
        assert!((g.0 - 1e-10).abs() < 1e-24);
    }

    #[test]
    fn gain_is_reciprocal_and_decreasing() {
        let a = Point::new(10.0, -5.0);
        let b = Point::new(-40.0, 22.0);
        assert_eq!(los_gain(a, b, 80.0, 1e-6), los_gain(b, a, 80.0, 1e-6));
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let g = los_gain(Point::new(i as f64 * 20.0, 0.0), Point::default(), 100.0, 1e-6).0;
            assert!(g < last && g <= 1e-10);
            last = g;
        }
    }

    #[test]
    fn overhead_rate_matches_hand_evaluation() {
        let (link, p_max) = reference_link();
        // Independent evaluation: denominator = 1e-12 * 3.981 * 2.9957 + 1e-14.
        let denom = 1e-6 * 1e-6 * 3.981_071_705_534_973 * -(0.05f64.ln()) + 1e-14;
        assert!((denom - 1.1936e-11).abs() < 1e-15);
        let expected = (1.0 + 1e-10 / denom).log2();
        let r = link.covert_rate(p_max, 0.05);
        assert!((r - expected).abs() < 1e-12);
        assert!((r - 3.23).abs() < 0.01, "{r}");
    }

    #[test]
    fn rate_edge_cases() {
        let (link, _) = reference_link();
        let no_an = link.covert_rate(0.0, 0.05);
        assert!((no_an - (1.0 + 1e-10 / 1e-14f64).log2()).abs() < 1e-12);
        let silent = Uplink { tx_power_w: 0.0, ..link };
        assert_eq!(silent.covert_rate(1.0, 0.05), 0.0);
    }

    #[test]
    fn rate_monotonicity() {
        let (link, _) = reference_link();
        let powers = [0.01, 0.1, 1.0, 4.0];
        for w in powers.windows(2) {
            assert!(link.covert_rate(w[0], 0.05) > link.covert_rate(w[1], 0.05));
        }
        let eps = [0.001, 0.01, 0.1, 0.5, 0.9];
        for w in eps.windows(2) {
            assert!(link.covert_rate(1.0, w[0]) < link.covert_rate(1.0, w[1]));
        }
    }

    #[test]
    fn outage_bound_inverts_covert_rate() {
        let (link, p_max) = reference_link();
        let r = link.covert_rate(p_max, 0.05);
        assert!((link.outage_bound(p_max, r) - 0.05).abs() < 1e-12);
        assert!(link.outage_bound(p_max, 1e-9) < 1e-300);
    }

    #[test]
    fn outage_bound_is_increasing_in_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let link = Uplink {
                tx_power_w: rng.random_range(0.1..2.0),
                gain: LinkGain(rng.random_range(1e-11..1e-10)),
                rho: rng.random_range(1e-7..1e-5),
                lambda_uu: rng.random_range(1e-7..1e-5),
                noise_w: 1e-14,
            };
            let p = rng.random_range(0.1..4.0);
            let r = rng.random_range(0.5..8.0);
            assert!(link.outage_bound(p, r + 0.01) >= link.outage_bound(p, r));
        }
    }

    #[test]
    fn mc_outage_edge_cases() {
        let (link, p_max) = reference_link();
        assert_eq!(link.mc_outage(p_max, 0.0, 10_000, 1), 0.0);
        let r = link.covert_rate(p_max, 0.05);
        assert_eq!(link.mc_outage(p_max, r, 100_000, 9), link.mc_outage(p_max, r, 100_000, 9));
    }

    fn link_strategy() -> impl proptest::strategy::Strategy<Value = Uplink> {
        use proptest::strategy::Strategy;
        (0.1f64..2.0, 1e-11f64..1e-9, 1e-7f64..1e-5, 1e-7f64..1e-5).prop_map(|(tx, g, rho, luu)| Uplink {
            tx_power_w: tx,
            gain: LinkGain(g),
            rho,
            lambda_uu: luu,
            noise_w: 1e-14,
        })
    }

    proptest::proptest! {
        #[test]
        fn gain_is_symmetric_bounded_and_falls_with_distance(
            qx in -500.0f64..500.0, qy in -500.0f64..500.0,
            dir in 0.0f64..std::f64::consts::TAU, d in 0.0f64..400.0, extra in 1.0f64..100.0,
            h in 50.0f64..300.0,
        ) {
            let q = Point::new(qx, qy);
            let at = |r: f64| Point::new(qx + r * dir.cos(), qy + r * dir.sin());
            let near = los_gain(q, at(d), h, 1e-6);
            proptest::prop_assert_eq!(near, los_gain(at(d), q, h, 1e-6));
            proptest::prop_assert!(near.value() <= 1e-6 / (h * h));
            proptest::prop_assert!(los_gain(q, at(d + extra), h, 1e-6) < near);
        }

        #[test]
        fn covert_rate_falls_with_an_power_and_rises_with_outage_budget(
            link in link_strategy(), p in 0.1f64..4.0, eps in 0.001f64..0.5,
        ) {
            let r = link.covert_rate(p, eps);
            proptest::prop_assert!(link.covert_rate(p * 1.1, eps) < r);
            proptest::prop_assert!(link.covert_rate(p, eps * 1.5) > r);
        }

        #[test]
        fn outage_bound_is_monotone_in_rate(link in link_strategy(), p in 0.1f64..4.0, r in 0.1f64..12.0, dr in 0.001f64..2.0) {
            let lo = link.outage_bound(p, r);
            let hi = link.outage_bound(p, r + dr);
            proptest::prop_assert!(hi >= lo);
            proptest::prop_assert!((0.0..=1.0).contains(&hi));
        }
    }
}
