use covert_uav::conic::{
    encode_quad_over_linear_le_affine, encode_sum_squares_le_affine, solve, AffExpr, ConeBlock, ConeKind, ConicProgram,
    SolveStatus,
};
use covert_uav::psca::{build_subproblem, PenaltySchedule};
use covert_uav::scenario::ScenarioFile;
use covert_uav::shaf::{build_initial_iterate, shaf_plan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

/// Random affine expression over `n` variables.
fn random_affine(rng: &mut ChaCha8Rng, n: usize) -> AffExpr {
    let mut e = AffExpr::constant(rng.random_range(-1.0..1.0));
    for i in 0..n {
        if rng.random_bool(0.7) {
            e = e.plus_term(i, rng.random_range(-2.0..2.0));
        }
    }
    e
}

/// Points whose margin to the boundary is under this are skipped: the
/// two sides are then equal to rounding and either answer is right.
const BOUNDARY: f64 = 1e-9;

#[test]
fn sum_squares_encoding_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..1000 {
        let n = 4;
        let terms: Vec<AffExpr> = (0..rng.random_range(1..4)).map(|_| random_affine(&mut rng, n)).collect();
        let bound = random_affine(&mut rng, n);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let lhs: f64 = terms.iter().map(|t| t.eval(&x).powi(2)).sum();
        let rhs = bound.eval(&x);
        if (lhs - rhs).abs() < BOUNDARY {
            continue;
        }
        let block = encode_sum_squares_le_affine(terms, bound);
        assert_eq!(block.contains(&x, 0.0), lhs <= rhs, "lhs {lhs} rhs {rhs}");
        checked += 1;
    }
    assert!(checked > 990);
}

#[test]
fn quad_over_linear_encoding_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    for _ in 0..1000 {
        let n = 4;
        let numerator: Vec<AffExpr> = (0..rng.random_range(1..4)).map(|_| random_affine(&mut rng, n)).collect();
        let denominator = random_affine(&mut rng, n);
        let bound = random_affine(&mut rng, n);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let d = denominator.eval(&x);
        let b = bound.eval(&x);
        let lhs: f64 = numerator.iter().map(|t| t.eval(&x).powi(2)).sum();
        // The encoding carries the precondition d >= 0 (and then b >= 0).
        let direct = d >= 0.0 && b >= 0.0 && lhs <= d * b;
        if (lhs - d * b).abs() < BOUNDARY || d.abs() < BOUNDARY || b.abs() < BOUNDARY {
            continue;
        }
        let block = encode_quad_over_linear_le_affine(numerator, denominator, bound);
        assert_eq!(block.contains(&x, 0.0), direct);
        checked += 1;
    }
    assert!(checked > 990);
}

#[test]
fn single_term_examples() {
    let block = encode_sum_squares_le_affine(vec![AffExpr::var(0)], AffExpr::var(1));
    assert!(block.contains(&[1.0, 1.0], 0.0));
    assert!(!block.contains(&[2.0, 1.0], 0.0));
    let empty = encode_sum_squares_le_affine(vec![], AffExpr::var(0));
    assert_eq!(empty.kind, ConeKind::Nonnegative);
    assert!(empty.contains(&[0.0], 0.0) && !empty.contains(&[-1e-3], 0.0));
    let unit = encode_quad_over_linear_le_affine(vec![AffExpr::var(0)], AffExpr::constant(1.0), AffExpr::var(1));
    assert!(unit.contains(&[2.0, 4.0], 0.0) && !unit.contains(&[2.0, 3.9], 0.0));
    let zero_den = encode_quad_over_linear_le_affine(vec![AffExpr::var(0)], AffExpr::constant(0.0), AffExpr::var(1));
    assert!(zero_den.contains(&[0.0, 5.0], 0.0) && !zero_den.contains(&[1e-3, 5.0], 0.0));
}

#[test]
fn maximize_under_a_linear_cap() {
    let mut p = ConicProgram::new();
    let x = p.add_var(f64::NEG_INFINITY, f64::INFINITY);
    p.set_objective(x, 1.0);
    p.push(ConeBlock::new(ConeKind::Nonnegative, vec![AffExpr::constant(3.0).plus_term(x, -1.0)]));
    let sol = solve(&p);
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.primal[x] - 3.0).abs() < 1e-7);
    assert!(sol.feasibility_residual <= 1e-8 && sol.gap <= 1e-8);
}

#[test]
fn forced_equality_through_a_cone() {
    let mut p = ConicProgram::new();
    let eta = p.add_var(f64::NEG_INFINITY, f64::INFINITY);
    p.set_objective(eta, 1.0);
    p.push(encode_sum_squares_le_affine(vec![AffExpr::var(eta).plus_const(-1.0)], AffExpr::constant(0.0)));
    let sol = solve(&p);
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.primal[eta] - 1.0).abs() < 1e-4, "{}", sol.primal[eta]);
}

#[test]
fn infeasible_and_unbounded_are_distinct() {
    let mut p = ConicProgram::new();
    let x = p.add_var(0.0, 1.0);
    p.set_objective(x, 1.0);
    p.push(ConeBlock::new(ConeKind::Nonnegative, vec![AffExpr::var(x).plus_const(-2.0)]));
    assert_eq!(solve(&p).status, SolveStatus::Infeasible);

    let mut p = ConicProgram::new();
    let x = p.add_var(0.0, f64::INFINITY);
    p.set_objective(x, 1.0);
    assert_eq!(solve(&p).status, SolveStatus::Unbounded);
}

/// Small program with a cone, a cap and a pinned variable.
fn disc_program(fix: Option<f64>) -> ConicProgram {
    let mut p = ConicProgram::new();
    let x = p.add_var(f64::NEG_INFINITY, f64::INFINITY);
    let y = p.add_var(f64::NEG_INFINITY, f64::INFINITY);
    let z = p.add_var(-5.0, 5.0);
    p.set_objective(x, 2.0);
    p.set_objective(y, 1.0);
    p.set_objective(z, 0.5);
    // x^2 + y^2 <= 1 + z.
    p.push(encode_sum_squares_le_affine(vec![AffExpr::var(x), AffExpr::var(y)], AffExpr::constant(1.0).plus_term(z, 1.0)));
    p.push(ConeBlock::new(ConeKind::Nonnegative, vec![AffExpr::constant(2.0).plus_term(z, -1.0)]));
    if let Some(v) = fix {
        p.fix_var(z, v);
    }
    p
}

#[test]
fn scaling_the_objective_keeps_the_argmax() {
    let base = disc_program(None);
    let a = solve(&base);
    let mut scaled = base.clone();
    for c in scaled.objective.iter_mut() {
        *c *= 1e3;
    }
    let b = solve(&scaled);
    assert_eq!(a.status, SolveStatus::Optimal);
    assert_eq!(b.status, SolveStatus::Optimal);
    for (u, v) in a.primal.iter().zip(&b.primal) {
        assert!((u - v).abs() <= 1e-8 * (1.0 + u.abs()) * 1e2, "{u} vs {v}");
    }
    assert!((b.objective_value - 1e3 * a.objective_value).abs() <= 1e-6 * b.objective_value.abs());
}

#[test]
fn pinned_variables_are_substituted() {
    let p = disc_program(Some(0.0));
    assert_eq!(p.free_vars(), 2);
    let sol = solve(&p);
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.primal[2], 0.0);
    // max 2x + y on the unit disc is sqrt 5 at (2, 1)/sqrt 5.
    assert!((sol.objective_value - 5f64.sqrt()).abs() < 1e-7);
    assert!((sol.primal[0] - 2.0 / 5f64.sqrt()).abs() < 1e-6);
}

#[test]
fn pinning_to_an_infeasible_value_is_reported() {
    // z pinned above its cap row.
    let p = disc_program(Some(3.0));
    assert_eq!(solve(&p).status, SolveStatus::Infeasible);
}

#[test]
fn json_round_trip_is_exact() {
    let p = disc_program(Some(0.25));
    let text = p.to_json();
    let back = ConicProgram::from_json(&text).unwrap();
    assert_eq!(back, p);
    assert_eq!(back.to_json(), text);
}

#[test]
fn solves_are_deterministic() {
    let p = disc_program(None);
    let a = solve(&p);
    let b = solve(&p);
    assert_eq!(a.status, b.status);
    assert_eq!(a.primal, b.primal);
}

#[derive(Deserialize)]
struct Reference {
    n_vars: usize,
    n_rows: usize,
    objective: f64,
}

/// First subproblem of the reference scenario against a fixture frozen
/// from ECOS (`scripts/make_conic_fixture.py`).
fn check_first_subproblem(fixture: &str, fixed_trajectory: bool) {
    let reference: Reference = serde_json::from_str(fixture).unwrap();
    let s = ScenarioFile::reference().to_scenario().unwrap();
    let plan = shaf_plan(&s);
    let init = build_initial_iterate(&s, &plan.trajectory, &plan.schedule).unwrap();
    let sub = build_subproblem(&init, PenaltySchedule::default().mu0, &s, fixed_trajectory).unwrap();
    assert_eq!(sub.program.n_vars(), reference.n_vars, "fixture is stale; regenerate it");
    assert_eq!(sub.program.n_rows(), reference.n_rows, "fixture is stale; regenerate it");
    let sol = solve(&sub.program);
    assert_eq!(sol.status, SolveStatus::Optimal);
    let rel = (sol.objective_value - reference.objective).abs() / reference.objective.abs();
    assert!(rel <= 1e-6, "clarabel {} vs reference {}", sol.objective_value, reference.objective);
}

#[test]
fn first_reference_subproblem_matches_independent_solver() {
    check_first_subproblem(include_str!("fixtures/first_subproblem_reference.json"), false);
}

#[test]
fn first_benchmark_subproblem_matches_independent_solver() {
    check_first_subproblem(include_str!("fixtures/first_benchmark_subproblem_reference.json"), true);
}
