//! Assembly of the convex subproblem around one iterate.
//!
//! Inside the program positions are in units of [`LENGTH_SCALE`] meters and
//! the AN cap is a fraction of the hardware cap. Each nonconvex constraint
//! is replaced by a restrictive convex one that is tight at the iterate:
//!
//! * `(1/N) sum_n x nu >= eta`: the product `4 x nu = (x + nu)^2 - (x - nu)^2`
//!   with the convex square linearized. Each product gets its own small
//!   cone and epigraph variable so the average is a linear row; one cone
//!   summing all slots cancels two large quadratics and stalls the solver.
//! * `nu <= R`: tangent plane of the rate, a quadratic bound in `q`.
//! * `sum_k x omega >= 1 - eps`: same product trick, one cone per slot.
//! * `omega <= 1 - xi_bar`: tangent line of `xi_bar` in the ratio
//!   `||q - w_m||^2 / P`, a quadratic-over-linear bound.
//! * `sum (x - x^2) <= phi`: the concave `-x^2` linearized, one linear row.

use crate::conic::{encode_quad_over_linear_le_affine, encode_sum_squares_le_affine, AffExpr, ConeBlock, ConeKind, ConicProgram};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::scenario::Scenario;

use super::surrogate::{rate_lower_bound, xi_upper_bound};
use super::{Iterate, UserSlots};

/// Meters per program length unit.
pub const LENGTH_SCALE: f64 = 100.0;

/// Variable indices of one subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub k: usize,
    pub n: usize,
    x0: usize,
    q0: usize,
    p0: usize,
    nu0: usize,
    omega0: usize,
    prod0: usize,
    pub eta: usize,
    pub phi: usize,
}

impl Layout {
    pub fn x(&self, k: usize, n: usize) -> usize {
        self.x0 + k * self.n + n
    }
    pub fn qx(&self, n: usize) -> usize {
        self.q0 + 2 * n
    }
    pub fn qy(&self, n: usize) -> usize {
        self.q0 + 2 * n + 1
    }
    pub fn p(&self, n: usize) -> usize {
        self.p0 + n
    }
    pub fn nu(&self, k: usize, n: usize) -> usize {
        self.nu0 + k * self.n + n
    }
    pub fn omega(&self, k: usize, n: usize) -> usize {
        self.omega0 + k * self.n + n
    }
    /// Lower bound on `4 x nu` for user `k` in slot `n`.
    pub fn prod(&self, k: usize, n: usize) -> usize {
        self.prod0 + k * self.n + n
    }
}

/// A subproblem together with its variable map and unit scales.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub layout: Layout,
    pub power_scale: f64,
}

impl Subproblem {
    /// Program variables holding `it`, in program units.
    pub fn point_of(&self, it: &Iterate) -> Vec<f64> {
        let l = &self.layout;
        let mut v = vec![0.0; self.program.n_vars()];
        for n in 0..l.n {
            for k in 0..l.k {
                v[l.x(k, n)] = it.x.get(k, n);
                v[l.nu(k, n)] = it.nu.get(k, n);
                v[l.omega(k, n)] = it.omega.get(k, n);
                v[l.prod(k, n)] = 4.0 * it.x.get(k, n) * it.nu.get(k, n);
            }
            let q = it.q.waypoints[n];
            v[l.qx(n)] = q.x / LENGTH_SCALE;
            v[l.qy(n)] = q.y / LENGTH_SCALE;
            v[l.p(n)] = it.p_umax[n] / self.power_scale;
        }
        v[l.eta] = it.eta;
        v[l.phi] = it.phi;
        v
    }

    /// Iterate held by program variables `v`. Schedule and power are
    /// clipped to their boxes to remove interior-point round-off.
    pub fn iterate_of(&self, v: &[f64], altitude: f64, min_power: f64) -> Iterate {
        let l = &self.layout;
        let mut x = UserSlots::zeros(l.k, l.n);
        let mut nu = UserSlots::zeros(l.k, l.n);
        let mut omega = UserSlots::zeros(l.k, l.n);
        let mut waypoints = Vec::with_capacity(l.n);
        let mut p = Vec::with_capacity(l.n);
        for n in 0..l.n {
            for k in 0..l.k {
                x.set(k, n, v[l.x(k, n)].clamp(0.0, 1.0));
                nu.set(k, n, v[l.nu(k, n)]);
                omega.set(k, n, v[l.omega(k, n)]);
            }
            waypoints.push(Point::new(v[l.qx(n)], v[l.qy(n)]) * LENGTH_SCALE);
            p.push((v[l.p(n)].min(1.0) * self.power_scale).max(min_power));
        }
        // Closure is an equality; make it exact.
        waypoints[l.n - 1] = waypoints[0];
        Iterate {
            x,
            q: crate::shaf::Trajectory { waypoints, altitude },
            p_umax: p,
            nu,
            omega,
            eta: v[l.eta],
            phi: v[l.phi].max(0.0),
        }
    }
}

/// Builds the convex restriction of the penalized problem around `it`
/// with penalty `mu`. With `fixed_trajectory` the waypoints are pinned.
pub fn build_subproblem(it: &Iterate, mu: f64, s: &Scenario, fixed_trajectory: bool) -> Result<Subproblem> {
    let (k_users, n_slots) = (s.n_users(), s.grid().n_slots);
    let nf = n_slots as f64;
    let power_scale = s.uav().p_max_an_w;
    let h = s.uav().altitude_m / LENGTH_SCALE;
    let mut prog = ConicProgram::new();
    let x0 = prog.add_vars(k_users * n_slots, 0.0, 1.0);
    let q0 = prog.add_vars(2 * n_slots, f64::NEG_INFINITY, f64::INFINITY);
    let p0 = prog.add_vars(n_slots, 0.0, 1.0);
    let nu0 = prog.add_vars(k_users * n_slots, f64::NEG_INFINITY, f64::INFINITY);
    let omega0 = prog.add_vars(k_users * n_slots, f64::NEG_INFINITY, f64::INFINITY);
    let eta = prog.add_var(f64::NEG_INFINITY, f64::INFINITY);
    let phi = prog.add_var(0.0, f64::INFINITY);
    let prod0 = prog.add_vars(k_users * n_slots, f64::NEG_INFINITY, f64::INFINITY);
    let l = Layout { k: k_users, n: n_slots, x0, q0, p0, nu0, omega0, prod0, eta, phi };
    prog.set_objective(eta, 1.0);
    prog.set_objective(phi, -mu);
    if fixed_trajectory {
        for n in 0..n_slots {
            let q = it.q.waypoints[n];
            prog.fix_var(l.qx(n), q.x / LENGTH_SCALE);
            prog.fix_var(l.qy(n), q.y / LENGTH_SCALE);
        }
    }
    let offset = |var: usize, w: f64| AffExpr::var(var).plus_const(-w);

    // Average rate: (x - nu)^2 <= 2a(x + nu) - a^2 - t per slot, (1/N) sum_n t >= 4 eta.
    for k in 0..k_users {
        let mut average = AffExpr::term(eta, -4.0);
        for n in 0..n_slots {
            let a = it.x.get(k, n) + it.nu.get(k, n);
            if a <= 0.0 {
                return Err(Error::Degenerate(format!("user {k} slot {n}: schedule plus rate slack is {a}")));
            }
            let (x, nu, t) = (l.x(k, n), l.nu(k, n), l.prod(k, n));
            // Divided through by a^2 so the cone entries stay O(1).
            let bound = (AffExpr::term(x, 2.0 * a).plus_term(nu, 2.0 * a).plus_term(t, -1.0).plus_const(-a * a)) * (1.0 / (a * a));
            prog.push(encode_sum_squares_le_affine(vec![AffExpr::var(x).plus_term(nu, -1.0) * (1.0 / a)], bound));
            average = average.plus_term(t, 1.0 / nf);
        }
        prog.push(ConeBlock::new(ConeKind::Nonnegative, vec![average]));
    }

    for n in 0..n_slots {
        let q_ref = it.q.waypoints[n];
        let p_ref = it.p_umax[n];
        let (qx, qy, p) = (l.qx(n), l.qy(n), l.p(n));

        // Rate slack: B L^2 ||q' - w'_k||^2 <= constant - C P - nu.
        for k in 0..k_users {
            let lb = rate_lower_bound(s, k, q_ref, p_ref);
            let w = lb.user * (1.0 / LENGTH_SCALE);
            let r = lb.dist_coef.sqrt() * LENGTH_SCALE;
            let bound = AffExpr::term(p, -lb.power_coef * power_scale)
                .plus_term(l.nu(k, n), -1.0)
                .plus_const(lb.constant());
            prog.push(encode_sum_squares_le_affine(vec![offset(qx, w.x) * r, offset(qy, w.y) * r], bound));
        }

        // Covertness slack: slope ||(q - w_m, H)||^2 / (beta_bar P) <= offset - omega,
        // written as (slope/g) ||.||^2 <= p' (offset - omega) with g = beta_bar P_cap / L^2.
        for k in 0..k_users {
            for m in (0..k_users).filter(|&m| m != k) {
                let ub = xi_upper_bound(s, k, m, q_ref, p_ref);
                let w = ub.warden * (1.0 / LENGTH_SCALE);
                let g = ub.beta_bar * power_scale / (LENGTH_SCALE * LENGTH_SCALE);
                let r = (ub.slope / g).sqrt();
                let numerator = vec![offset(qx, w.x) * r, offset(qy, w.y) * r, AffExpr::constant(h * r)];
                let bound = AffExpr::term(l.omega(k, n), -1.0).plus_const(ub.offset());
                prog.push(encode_quad_over_linear_le_affine(numerator, AffExpr::var(p), bound));
            }
        }

        // Covertness: sum_k (x - omega)^2 <= sum_k [2b(x + omega) - b^2] - 4(1 - eps).
        let mut terms = Vec::with_capacity(k_users);
        let mut bound = AffExpr::constant(-4.0 * (1.0 - s.rc().covert_eps));
        for k in 0..k_users {
            let b = it.x.get(k, n) + it.omega.get(k, n);
            terms.push(AffExpr::var(l.x(k, n)).plus_term(l.omega(k, n), -1.0));
            bound = bound.plus_term(l.x(k, n), 2.0 * b).plus_term(l.omega(k, n), 2.0 * b).plus_const(-b * b);
        }
        prog.push(encode_sum_squares_le_affine(terms, bound));

        // At most one user per slot.
        let mut row = AffExpr::constant(1.0);
        for k in 0..k_users {
            row = row.plus_term(l.x(k, n), -1.0);
        }
        prog.push(ConeBlock::new(ConeKind::Nonnegative, vec![row]));
    }

    // Binary gap: sum (x + x_ref^2 - 2 x_ref x) <= phi.
    let mut row = AffExpr::var(phi);
    for k in 0..k_users {
        for n in 0..n_slots {
            let xr = it.x.get(k, n);
            row = row.plus_term(l.x(k, n), -(1.0 - 2.0 * xr)).plus_const(-xr * xr);
        }
    }
    prog.push(ConeBlock::new(ConeKind::Nonnegative, vec![row]));

    // Closed trajectory and speed limit.
    let last = n_slots - 1;
    prog.push(ConeBlock::new(
        ConeKind::Zero,
        vec![
            AffExpr::var(l.qx(0)).plus_term(l.qx(last), -1.0),
            AffExpr::var(l.qy(0)).plus_term(l.qy(last), -1.0),
        ],
    ));
    let step = s.step_limit() / LENGTH_SCALE;
    for n in 0..last {
        prog.push(ConeBlock::new(
            ConeKind::SecondOrder,
            vec![
                AffExpr::constant(step),
                AffExpr::var(l.qx(n + 1)).plus_term(l.qx(n), -1.0),
                AffExpr::var(l.qy(n + 1)).plus_term(l.qy(n), -1.0),
            ],
        ));
    }
    Ok(Subproblem { program: prog, layout: l, power_scale })
}
