//! Successive hover-and-fly (SHAF) initial design.
//!
//! The UAV visits the users along a nearest-neighbour tour at full speed
//! and splits the spare time into hovers, longer over isolated users. When
//! the period is too short for the tour, the tour is shrunk toward the
//! users' geometric center until it fits.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::channel::Uplink;
use crate::detection::{min_covert_power, strongest_warden};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::psca::{Iterate, UserSlots};
use crate::scenario::{GroundUser, Scenario};

/// Relative tolerance for comparing tour lengths.
const TOUR_TIE_TOL: f64 = 1e-12;

/// Lowest AN cap handed to the optimizer, as a fraction of the hardware cap.
/// The covertness surrogate is expanded around a strictly positive power.
pub const MIN_POWER_FRACTION: f64 = 1e-9;

/// Closed visiting order over the users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    /// User indices in visiting order; the tour returns to `order[0]`.
    pub order: Vec<usize>,
    pub length_m: f64,
    pub t_min_s: f64,
}

fn closed_length(points: &[Point], order: &[usize]) -> f64 {
    (0..order.len()).map(|i| points[order[i]].dist(points[order[(i + 1) % order.len()]])).sum()
}

/// Greedy nearest-neighbour tour from every start, keeping the shortest.
/// Ties between candidate next users, and between equally long tours, go
/// to the lower user id.
pub fn nearest_neighbour_tour(users: &[GroundUser], v_max_mps: f64) -> Tour {
    let k = users.len();
    assert!(k >= 2, "a tour needs at least two users");
    let points: Vec<Point> = users.iter().map(|u| u.position).collect();
    let by_id = |a: usize, b: usize| users[a].id.cmp(&users[b].id);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut starts: Vec<usize> = (0..k).collect();
    starts.sort_by(|&a, &b| by_id(a, b));
    for &start in &starts {
        let mut order = vec![start];
        let mut visited = vec![false; k];
        visited[start] = true;
        while order.len() < k {
            let here = points[*order.last().unwrap()];
            let next = (0..k)
                .filter(|&j| !visited[j])
                .min_by(|&a, &b| here.dist(points[a]).total_cmp(&here.dist(points[b])).then(by_id(a, b)))
                .unwrap();
            visited[next] = true;
            order.push(next);
        }
        let length = closed_length(&points, &order);
        let better = match &best {
            None => true,
            Some((bl, bo)) => {
                if (length - bl).abs() <= TOUR_TIE_TOL * bl.max(1.0) {
                    let ids = |o: &[usize]| o.iter().map(|&i| users[i].id).collect::<Vec<_>>();
                    ids(&order) < ids(bo)
                } else {
                    length < *bl
                }
            }
        };
        if better {
            best = Some((length, order));
        }
    }
    let (length_m, order) = best.unwrap();
    Tour { order, length_m, t_min_s: length_m / v_max_mps }
}

/// Spare time split over the users in inverse proportion to the distance
/// to their nearest neighbour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoverPlan {
    /// Hover duration per user index, seconds.
    pub hover_s: Vec<f64>,
    /// Distance from each user to its nearest other user, meters.
    pub nearest_dist: Vec<f64>,
}

fn nearest_distances(users: &[GroundUser]) -> Vec<f64> {
    users
        .iter()
        .enumerate()
        .map(|(i, u)| {
            users
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| u.position.dist(v.position))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Inverse-distance weights. Users sharing a position with another user
/// take all the weight between them.
fn inverse_distance_weights(d: &[f64]) -> Vec<f64> {
    if d.contains(&0.0) {
        d.iter().map(|&x| if x == 0.0 { 1.0 } else { 0.0 }).collect()
    } else {
        d.iter().map(|&x| 1.0 / x).collect()
    }
}

pub fn hover_allocation(period_s: f64, tour: &Tour, users: &[GroundUser]) -> Result<HoverPlan> {
    if period_s < tour.t_min_s {
        return Err(Error::InsufficientTime { period_s, t_min_s: tour.t_min_s });
    }
    let nearest_dist = nearest_distances(users);
    let w = inverse_distance_weights(&nearest_dist);
    let total: f64 = w.iter().sum();
    let spare = period_s - tour.t_min_s;
    Ok(HoverPlan { hover_s: w.iter().map(|wk| wk / total * spare).collect(), nearest_dist })
}

/// Piecewise-linear path through timed knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPath {
    /// `(time s, position)` with non-decreasing times.
    pub knots: Vec<(f64, Point)>,
}

impl ContinuousPath {
    pub fn duration(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.0) - self.knots.first().map_or(0.0, |k| k.0)
    }

    pub fn length(&self) -> f64 {
        self.knots.windows(2).map(|w| w[0].1.dist(w[1].1)).sum()
    }

    pub fn eval(&self, t: f64) -> Point {
        let i = self.knots.partition_point(|k| k.0 <= t);
        if i == 0 {
            return self.knots[0].1;
        }
        if i == self.knots.len() {
            return self.knots[i - 1].1;
        }
        let (t0, p0) = self.knots[i - 1];
        let (t1, p1) = self.knots[i];
        p0.lerp(p1, (t - t0) / (t1 - t0))
    }

    /// Flight at `v_max` along the closed tour, no hovering.
    pub fn tour_flight(tour: &Tour, points: &[Point], v_max: f64) -> Self {
        let mut t = 0.0;
        let mut knots = vec![(0.0, points[tour.order[0]])];
        for i in 0..tour.order.len() {
            let (a, b) = (points[tour.order[i]], points[tour.order[(i + 1) % tour.order.len()]]);
            t += a.dist(b) / v_max;
            knots.push((t, b));
        }
        ContinuousPath { knots }
    }

    /// Hover over each tour user for its planned time, then fly on.
    pub fn hover_and_fly(tour: &Tour, plan: &HoverPlan, points: &[Point], v_max: f64) -> Self {
        let mut t = 0.0;
        let mut knots = vec![(0.0, points[tour.order[0]])];
        for i in 0..tour.order.len() {
            let u = tour.order[i];
            let next = tour.order[(i + 1) % tour.order.len()];
            t += plan.hover_s[u];
            knots.push((t, points[u]));
            t += points[u].dist(points[next]) / v_max;
            knots.push((t, points[next]));
        }
        ContinuousPath { knots }
    }
}

/// Time-stretches `path` to `period_s` and contracts it toward `center` by
/// the same factor, so flight speed is unchanged and the length shrinks to
/// `v_max * period_s`.
pub fn scale_trajectory(path: &ContinuousPath, period_s: f64, center: Point) -> ContinuousPath {
    let factor = period_s / path.duration();
    let t0 = path.knots[0].0;
    ContinuousPath {
        knots: path
            .knots
            .iter()
            .map(|&(t, p)| (t0 + factor * (t - t0), p * factor + center * (1.0 - factor)))
            .collect(),
    }
}

/// `N` horizontal waypoints at a fixed altitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Point>,
    pub altitude: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Gap between the first and last waypoint.
    pub fn closure_gap(&self) -> f64 {
        self.waypoints[0].dist(*self.waypoints.last().unwrap())
    }

    /// Largest excess of a step over `step_limit`, zero when all fit.
    pub fn speed_excess(&self, step_limit: f64) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].dist(w[1]) - step_limit).fold(0.0, f64::max)
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    pub fn mean_distance_from(&self, p: Point) -> f64 {
        self.waypoints.iter().map(|w| w.dist(p)).sum::<f64>() / self.len() as f64
    }

    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        self.waypoints.iter().zip(&other.waypoints).map(|(a, b)| a.dist(*b)).fold(0.0, f64::max)
    }
}

/// Everything the initializer produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShafPlan {
    pub tour: Tour,
    /// Present when the period covers the tour.
    pub hover: Option<HoverPlan>,
    /// Contraction factor toward the center, 1 when hovering.
    pub scale: f64,
    pub path: ContinuousPath,
    pub trajectory: Trajectory,
    /// Scheduled user index per slot.
    pub schedule: Vec<usize>,
}

/// Largest-remainder split of `total` whole slots by `weights`, remainders
/// going first to the largest fraction and then to the lowest id.
fn apportion(total: usize, weights: &[f64], ids: &[u32]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - out.iter().sum::<usize>();
    let mut rank: Vec<usize> = (0..weights.len()).collect();
    rank.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.partial_cmp(&fa).unwrap_or(Ordering::Equal).then(ids[a].cmp(&ids[b]))
    });
    for &i in &rank {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// Discrete hover-and-fly: each leg takes the fewest whole steps that
/// respect the speed limit, and the remaining steps become hovers.
fn discretize_hover(s: &Scenario, tour: &Tour) -> Option<(Vec<Point>, Vec<usize>)> {
    let n = s.grid().n_slots;
    let step = s.step_limit();
    let k = tour.order.len();
    let legs: Vec<(usize, usize)> = (0..k).map(|i| (tour.order[i], tour.order[(i + 1) % k])).collect();
    let flight: Vec<usize> = legs.iter().map(|&(a, b)| (s.position(a).dist(s.position(b)) / step).ceil() as usize).collect();
    let spare = (n - 1).checked_sub(flight.iter().sum())?;
    let d = nearest_distances(s.users());
    let ids: Vec<u32> = s.users().iter().map(|u| u.id).collect();
    let hover = apportion(spare, &inverse_distance_weights(&d), &ids);
    let mut points = vec![s.position(tour.order[0])];
    let mut sched = vec![tour.order[0]];
    for (leg, &(a, b)) in legs.iter().enumerate() {
        for _ in 0..hover[a] {
            points.push(s.position(a));
            sched.push(a);
        }
        let (pa, pb) = (s.position(a), s.position(b));
        for i in 1..=flight[leg] {
            points.push(if i == flight[leg] { pb } else { pa.lerp(pb, i as f64 / flight[leg] as f64) });
            sched.push(b);
        }
    }
    debug_assert_eq!(points.len(), n);
    Some((points, sched))
}

/// Samples the closed tour polygon, contracted toward `center`, at `n`
/// arc-length-uniform points whose spacing is exactly `step`.
fn discretize_contracted(s: &Scenario, tour: &Tour, center: Point) -> (Vec<Point>, Vec<usize>) {
    let n = s.grid().n_slots;
    let k = tour.order.len();
    let factor = ((n - 1) as f64 * s.step_limit() / tour.length_m).min(1.0);
    let verts: Vec<Point> = tour.order.iter().map(|&u| s.position(u) * factor + center * (1.0 - factor)).collect();
    let mut cum = vec![0.0];
    for i in 0..k {
        cum.push(cum[i] + verts[i].dist(verts[(i + 1) % k]));
    }
    let total = cum[k];
    let mut points = Vec::with_capacity(n);
    let mut sched = Vec::with_capacity(n);
    for j in 0..n {
        if j == 0 || j == n - 1 {
            points.push(verts[0]);
            sched.push(tour.order[0]);
            continue;
        }
        let arc = total * j as f64 / (n - 1) as f64;
        let leg = (cum.partition_point(|&c| c < arc) - 1).min(k - 1);
        let len = cum[leg + 1] - cum[leg];
        let frac = if len > 0.0 { (arc - cum[leg]) / len } else { 0.0 };
        points.push(verts[leg].lerp(verts[(leg + 1) % k], frac));
        sched.push(tour.order[(leg + 1) % k]);
    }
    (points, sched)
}

/// Builds the SHAF design for `s`.
pub fn shaf_plan(s: &Scenario) -> ShafPlan {
    let v = s.uav().v_max_mps;
    let period = s.grid().period_s;
    let points: Vec<Point> = s.users().iter().map(|u| u.position).collect();
    let tour = nearest_neighbour_tour(s.users(), v);
    let center = s.center();
    let (hover, scale, path) = match hover_allocation(period, &tour, s.users()) {
        Ok(plan) => {
            let path = ContinuousPath::hover_and_fly(&tour, &plan, &points, v);
            (Some(plan), 1.0, path)
        }
        Err(_) => {
            let flight = ContinuousPath::tour_flight(&tour, &points, v);
            (None, period / tour.t_min_s, scale_trajectory(&flight, period, center))
        }
    };
    let (waypoints, schedule) = match hover {
        Some(_) => discretize_hover(s, &tour),
        None => None,
    }
    .unwrap_or_else(|| discretize_contracted(s, &tour, center));
    let trajectory = Trajectory { waypoints, altitude: s.uav().altitude_m };
    ShafPlan { tour, hover, scale, path, trajectory, schedule }
}

/// Feasible starting point for the optimizer: binary schedule, smallest
/// covert AN cap per slot, rate and covertness slacks set to their exact
/// values.
pub fn build_initial_iterate(s: &Scenario, trajectory: &Trajectory, schedule: &[usize]) -> Result<Iterate> {
    let n = s.grid().n_slots;
    let k = s.n_users();
    if trajectory.len() != n || schedule.len() != n {
        return Err(Error::Precondition(format!("expected {n} waypoints and schedule entries")));
    }
    if trajectory.closure_gap() > 0.0 {
        return Err(Error::Precondition("trajectory does not return to its start".into()));
    }
    let excess = trajectory.speed_excess(s.step_limit());
    if excess > 1e-9 {
        return Err(Error::Precondition(format!("trajectory exceeds the speed limit by {excess:.3e} m per slot")));
    }
    if let Some(&bad) = schedule.iter().find(|&&u| u >= k) {
        return Err(Error::Precondition(format!("schedule references unknown user index {bad}")));
    }
    let cap = s.uav().p_max_an_w;
    let eps = s.rc().covert_eps;
    let mut x = UserSlots::zeros(k, n);
    let mut p = vec![0.0; n];
    for (slot, (&q, &u)) in trajectory.waypoints.iter().zip(schedule).enumerate() {
        x.set(u, slot, 1.0);
        p[slot] = min_covert_power(s, u, q, eps, cap)
            .ok_or(Error::CovertInfeasible { slot, user_id: s.users()[u].id })?
            .max(MIN_POWER_FRACTION * cap);
    }
    let mut nu = UserSlots::zeros(k, n);
    let mut omega = UserSlots::zeros(k, n);
    for (slot, &q) in trajectory.waypoints.iter().enumerate() {
        for user in 0..k {
            nu.set(user, slot, Uplink::from_scenario(s, user, q).covert_rate(p[slot], s.rc().outage_eps));
            omega.set(user, slot, strongest_warden(s, user, q, p[slot]).0);
        }
    }
    let eta = (0..k)
        .map(|u| (0..n).map(|j| x.get(u, j) * nu.get(u, j)).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min);
    Ok(Iterate { x, q: trajectory.clone(), p_umax: p, nu, omega, eta, phi: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioFile;
    use std::collections::BTreeMap;

    fn users(points: &[(f64, f64)]) -> Vec<GroundUser> {
        points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| GroundUser {
                id: i as u32 + 1,
                position: Point::new(x, y),
                tx_power_w: 1.0,
                inter_user_fading: BTreeMap::new(),
            })
            .collect()
    }

    #[test]
    fn two_users_out_and_back() {
        let t = nearest_neighbour_tour(&users(&[(0.0, 0.0), (30.0, 40.0)]), 5.0);
        assert_eq!(t.length_m, 100.0);
        assert_eq!(t.t_min_s, 20.0);
    }

    #[test]
    fn collinear_users() {
        let t = nearest_neighbour_tour(&users(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]), 1.0);
        assert!((t.length_m - 4.0).abs() < 1e-12);
    }

    #[test]
    fn reference_tour_is_the_perimeter() {
        let s = ScenarioFile::reference().to_scenario().unwrap();
        let t = nearest_neighbour_tour(s.users(), 6.0);
        assert_eq!(t.order, vec![0, 1, 2, 3]);
        assert!((t.length_m - 932.95).abs() < 0.01);
        assert!((t.t_min_s - 155.49).abs() < 0.01);
    }

    #[test]
    fn hover_split_is_even_for_symmetric_users() {
        let s = ScenarioFile::reference().to_scenario().unwrap();
        let t = nearest_neighbour_tour(s.users(), 6.0);
        let plan = hover_allocation(240.0, &t, s.users()).unwrap();
        for h in &plan.hover_s {
            assert!((h - 21.13).abs() < 0.01, "{h}");
        }
        assert!((plan.hover_s.iter().sum::<f64>() - (240.0 - t.t_min_s)).abs() < 1e-9);
        let tight = hover_allocation(t.t_min_s, &t, s.users()).unwrap();
        assert!(tight.hover_s.iter().all(|&h| h == 0.0));
        assert!(matches!(hover_allocation(100.0, &t, s.users()), Err(Error::InsufficientTime { .. })));
    }

    #[test]
    fn hover_share_is_inverse_distance() {
        let u = users(&[(0.0, 0.0), (10.0, 0.0), (0.0, 40.0), (100.0, 100.0)]);
        let t = nearest_neighbour_tour(&u, 1.0);
        let plan = hover_allocation(t.t_min_s + 100.0, &t, &u).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let lhs = plan.hover_s[i] * plan.nearest_dist[i];
                let rhs = plan.hover_s[j] * plan.nearest_dist[j];
                assert!((lhs - rhs).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scaling_contracts_toward_center() {
        let s = ScenarioFile::reference().to_scenario().unwrap();
        let pts: Vec<Point> = s.users().iter().map(|u| u.position).collect();
        let t = nearest_neighbour_tour(s.users(), 6.0);
        let flight = ContinuousPath::tour_flight(&t, &pts, 6.0);
        let same = scale_trajectory(&flight, flight.duration(), s.center());
        assert_eq!(same, flight);
        let scaled = scale_trajectory(&flight, 120.0, s.center());
        assert!((scaled.duration() - 120.0).abs() < 1e-9);
        assert!((scaled.length() - 720.0).abs() < 0.1);
        let factor = 120.0 / t.t_min_s;
        assert!((factor - 0.7718).abs() < 1e-4);
        for ((_, a), (_, b)) in flight.knots.iter().zip(&scaled.knots) {
            let along = (*b - s.center()).norm() / (*a - s.center()).norm();
            let cross = (a.x - s.center().x) * (b.y - s.center().y) - (a.y - s.center().y) * (b.x - s.center().x);
            assert!(cross.abs() < 1e-9 && along <= 1.0);
        }
    }

    #[test]
    fn apportion_gives_leftover_to_largest_remainder() {
        assert_eq!(apportion(83, &[1.0, 1.0, 1.0, 1.0], &[1, 2, 3, 4]), vec![21, 21, 21, 20]);
        assert_eq!(apportion(10, &[1.0, 3.0], &[1, 2]), vec![3, 7]);
        assert_eq!(apportion(0, &[1.0, 3.0], &[1, 2]), vec![0, 0]);
    }

    #[test]
    fn reference_plan_hovers_and_flies() {
        let s = ScenarioFile::reference().to_scenario().unwrap();
        let plan = shaf_plan(&s);
        let traj = &plan.trajectory;
        assert_eq!(traj.len(), 240);
        assert_eq!(traj.closure_gap(), 0.0);
        assert!(traj.speed_excess(s.step_limit()) <= 1e-9);
        let over_user: Vec<usize> =
            (0..4).map(|u| traj.waypoints.iter().filter(|&&w| w == s.position(u)).count()).collect();
        // 21/21/21/20 hovers plus the arrival waypoint, and the start.
        assert_eq!(over_user, vec![23, 22, 22, 21]);
        assert!((plan.path.duration() - 240.0).abs() < 1e-9);
    }

    #[test]
    fn short_period_plan_is_contracted() {
        let s = ScenarioFile::reference().to_scenario().unwrap().with_period(120.0).unwrap();
        let plan = shaf_plan(&s);
        assert!(plan.hover.is_none());
        assert!((plan.path.length() - 720.0).abs() < 0.1);
        let traj = &plan.trajectory;
        assert_eq!(traj.closure_gap(), 0.0);
        assert!(traj.speed_excess(s.step_limit()) <= 1e-9);
        // Uniform arc-length samples cut the corners, so the polyline is a
        // little shorter than the contracted curve.
        let full = 119.0 * 6.0;
        assert!(traj.length() <= full + 1e-9 && traj.length() > 0.98 * full, "{}", traj.length());
    }

    #[test]
    fn initial_iterate_rejects_speeding() {
        let s = ScenarioFile::reference().to_scenario().unwrap();
        let plan = shaf_plan(&s);
        let mut bad = plan.trajectory.clone();
        bad.waypoints[5].x += 50.0;
        assert!(matches!(build_initial_iterate(&s, &bad, &plan.schedule), Err(Error::Precondition(_))));
    }

    #[test]
    fn vacuous_covertness_needs_no_noise() {
        let s = ScenarioFile::reference().to_scenario().unwrap().with_covert_eps(1.0 - 1e-12).unwrap();
        let plan = shaf_plan(&s);
        let it = build_initial_iterate(&s, &plan.trajectory, &plan.schedule).unwrap();
        assert!(it.p_umax.iter().all(|&p| p <= 1e-6));
    }

    /// Shortest closed tour by enumerating every order with user 0 first.
    fn brute_force_length(points: &[Point]) -> f64 {
        fn go(points: &[Point], order: &mut Vec<usize>, used: &mut [bool], best: &mut f64) {
            if order.len() == points.len() {
                *best = best.min(closed_length(points, order));
                return;
            }
            for j in 1..points.len() {
                if !used[j] {
                    used[j] = true;
                    order.push(j);
                    go(points, order, used, best);
                    order.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        let mut used = vec![false; points.len()];
        used[0] = true;
        go(points, &mut vec![0], &mut used, &mut best);
        best
    }

    fn tour_of(points: &[(f64, f64)]) -> (f64, f64) {
        let u = users(points);
        let pts: Vec<Point> = u.iter().map(|u| u.position).collect();
        (nearest_neighbour_tour(&u, 1.0).length_m, brute_force_length(&pts))
    }

    #[test]
    fn reference_tour_is_optimal() {
        let (nn, best) = tour_of(&[(200.0, 0.0), (0.0, 120.0), (-200.0, 0.0), (0.0, -120.0)]);
        assert!((nn - best).abs() < 1e-9);
    }

    #[test]
    fn greedy_tour_can_miss_the_optimum() {
        // Every start is tried and still the best greedy tour is 6% long.
        let (nn, best) = tour_of(&[(50.0, 40.0), (50.0, 80.0), (100.0, 80.0), (0.0, 20.0)]);
        assert!((best - 245.985387).abs() < 1e-6);
        assert!((nn - 260.470686).abs() < 1e-6);
    }

    fn random_scenario(points: &[(f64, f64)], period_s: f64) -> Scenario {
        let mut file = ScenarioFile::reference();
        let template = file.users[0].clone();
        file.users = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| crate::scenario::UserSpec { id: i as u32 + 1, xy_m: [x, y], ..template.clone() })
            .collect();
        file.grid.period_s = period_s;
        file.to_scenario().unwrap()
    }

    proptest::proptest! {
        #[test]
        fn greedy_tour_is_optimal_up_to_three_users_and_never_beats_brute_force(
            pts in proptest::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 2..=6),
        ) {
            let (nn, best) = tour_of(&pts);
            proptest::prop_assert!(nn >= best - 1e-9);
            if pts.len() <= 3 {
                proptest::prop_assert!((nn - best).abs() <= 1e-9 * best.max(1.0));
            }
        }

        #[test]
        fn discrete_plans_close_and_respect_the_speed_limit(
            pts in proptest::collection::vec((-300.0f64..300.0, -300.0f64..300.0), 2..=5),
            period in 20usize..400,
        ) {
            let s = random_scenario(&pts, period as f64);
            let plan = shaf_plan(&s);
            let traj = &plan.trajectory;
            proptest::prop_assert_eq!(traj.len(), s.grid().n_slots);
            proptest::prop_assert_eq!(plan.schedule.len(), s.grid().n_slots);
            proptest::prop_assert_eq!(traj.closure_gap(), 0.0);
            proptest::prop_assert!(traj.speed_excess(s.step_limit()) <= 1e-9);
            proptest::prop_assert!(plan.schedule.iter().all(|&k| k < s.n_users()));
        }
    }
}
