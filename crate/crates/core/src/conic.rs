//! Backend-agnostic conic programs.
//!
//! A program maximizes a linear objective over box-bounded variables
//! subject to blocks of affine rows, each block required to lie in one
//! cone. The cones are the zero cone, the nonnegative orthant, the
//! second-order cone `{(t, w) : ||w|| <= t}` and the rotated second-order
//! cone `{(u, v, w) : 2uv >= ||w||^2, u, v >= 0}`.
//!
//! The default backend is Clarabel. Before handing data over, a presolve
//! substitutes pinned variables and folds rows that became constant.

use std::ops::{Add, Mul, Neg, Sub};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

/// Membership tolerance for blocks that presolve reduces to constants.
const CONSTANT_BLOCK_TOL: f64 = 1e-9;

/// `sum_i coef_i * x[var_i] + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn constant(c: f64) -> Self {
        AffExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(i: usize) -> Self {
        Self::term(i, 1.0)
    }

    pub fn term(i: usize, coef: f64) -> Self {
        AffExpr { terms: vec![(i, coef)], constant: 0.0 }
    }

    pub fn plus_term(mut self, i: usize, coef: f64) -> Self {
        self.terms.push((i, coef));
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.iter().all(|&(_, c)| c.is_finite())
    }
}

impl Add for AffExpr {
    type Output = AffExpr;
    fn add(mut self, rhs: AffExpr) -> AffExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Mul<f64> for AffExpr {
    type Output = AffExpr;
    fn mul(mut self, a: f64) -> AffExpr {
        self.terms.iter_mut().for_each(|t| t.1 *= a);
        self.constant *= a;
        self
    }
}

impl Neg for AffExpr {
    type Output = AffExpr;
    fn neg(self) -> AffExpr {
        self * -1.0
    }
}

impl Sub for AffExpr {
    type Output = AffExpr;
    fn sub(self, rhs: AffExpr) -> AffExpr {
        self + -rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Zero,
    Nonnegative,
    SecondOrder,
    RotatedSecondOrder,
}

/// Rows that must jointly lie in one cone. For the second-order cones the
/// first row (or first two, rotated) are the scalar sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub rows: Vec<AffExpr>,
}

impl ConeBlock {
    pub fn new(kind: ConeKind, rows: Vec<AffExpr>) -> Self {
        let min_rows = match kind {
            ConeKind::Zero | ConeKind::Nonnegative | ConeKind::SecondOrder => 1,
            ConeKind::RotatedSecondOrder => 2,
        };
        assert!(rows.len() >= min_rows, "{kind:?} block needs at least {min_rows} rows");
        ConeBlock { kind, rows }
    }

    /// Distance-like violation of the membership at `x`; zero when inside.
    /// Rotated cones are measured through their second-order equivalent.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        violation_of(self.kind, &v)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

fn violation_of(kind: ConeKind, v: &[f64]) -> f64 {
    let norm = |w: &[f64]| w.iter().map(|a| a * a).sum::<f64>().sqrt();
    match kind {
        ConeKind::Zero => v.iter().fold(0.0, |m, a| m.max(a.abs())),
        ConeKind::Nonnegative => v.iter().fold(0.0, |m, &a| m.max(-a)),
        ConeKind::SecondOrder => (norm(&v[1..]) - v[0]).max(0.0),
        ConeKind::RotatedSecondOrder => {
            let (t, s) = rotated_to_standard(v[0], v[1]);
            let lhs = (s * s + v[2..].iter().map(|a| a * a).sum::<f64>()).sqrt();
            (lhs - t).max(0.0)
        }
    }
}

/// `2uv >= ||w||^2, u, v >= 0` iff `||((u - v)/sqrt2, w)|| <= (u + v)/sqrt2`.
fn rotated_to_standard(u: f64, v: f64) -> (f64, f64) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    (r * (u + v), r * (u - v))
}

/// `sum_i terms_i^2 <= bound` as a rotated cone `(1/2, bound, terms...)`.
/// With no terms this is the linear row `bound >= 0`.
pub fn encode_sum_squares_le_affine(terms: Vec<AffExpr>, bound: AffExpr) -> ConeBlock {
    if terms.is_empty() {
        return ConeBlock::new(ConeKind::Nonnegative, vec![bound]);
    }
    let mut rows = vec![AffExpr::constant(0.5), bound];
    rows.extend(terms);
    ConeBlock::new(ConeKind::RotatedSecondOrder, rows)
}

/// `sum_i numerator_i^2 <= denominator * bound` with both factors
/// nonnegative, as the rotated cone `(denominator / 2, bound, numerator...)`.
pub fn encode_quad_over_linear_le_affine(numerator: Vec<AffExpr>, denominator: AffExpr, bound: AffExpr) -> ConeBlock {
    let mut rows = vec![denominator * 0.5, bound];
    rows.extend(numerator);
    ConeBlock::new(ConeKind::RotatedSecondOrder, rows)
}

/// A conic program in maximization form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub objective: Vec<f64>,
    #[serde(with = "bounds_serde::lower")]
    pub lower: Vec<f64>,
    #[serde(with = "bounds_serde::upper")]
    pub upper: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    /// Adds a variable with bounds `[lower, upper]` (infinite allowed).
    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.objective.push(0.0);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_vars(&mut self, n: usize, lower: f64, upper: f64) -> usize {
        let first = self.n_vars();
        (0..n).for_each(|_| {
            self.add_var(lower, upper);
        });
        first
    }

    pub fn fix_var(&mut self, i: usize, value: f64) {
        self.lower[i] = value;
        self.upper[i] = value;
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.lower[i] == self.upper[i]
    }

    pub fn free_vars(&self) -> usize {
        (0..self.n_vars()).filter(|&i| !self.is_fixed(i)).count()
    }

    pub fn set_objective(&mut self, i: usize, coef: f64) {
        self.objective[i] = coef;
    }

    pub fn push(&mut self, block: ConeBlock) {
        self.blocks.push(block);
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks dimensions, finiteness and index ranges.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err("bound vectors do not match the variable count".into());
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err("non-finite objective coefficient".into());
        }
        for (i, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(format!("variable {i} has invalid bounds [{l}, {u}]"));
            }
        }
        for (b, block) in self.blocks.iter().enumerate() {
            for row in &block.rows {
                if !row.is_finite() {
                    return Err(format!("block {b} has non-finite data"));
                }
                if row.terms.iter().any(|&(i, _)| i >= n) {
                    return Err(format!("block {b} references an unknown variable"));
                }
            }
        }
        Ok(())
    }

    /// Largest cone or bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = (0..self.n_vars())
            .map(|i| (self.lower[i] - x[i]).max(x[i] - self.upper[i]).max(0.0))
            .fold(0.0, f64::max);
        self.blocks.iter().map(|b| b.violation(x)).fold(bounds, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("program data is serializable")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Infinite bounds are written as `null` and read back with the sign of
/// the side they bound.
mod bounds_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    fn deserialize<'de, D: Deserializer<'de>>(d: D, missing: f64) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(missing)).collect())
    }

    pub mod lower {
        use serde::{Deserializer, Serializer};
        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            super::serialize(v, s)
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            super::deserialize(d, f64::NEG_INFINITY)
        }
    }

    pub mod upper {
        use serde::{Deserializer, Serializer};
        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            super::serialize(v, s)
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            super::deserialize(d, f64::INFINITY)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// One entry per program variable, pinned ones included.
    pub primal: Vec<f64>,
    pub objective_value: f64,
    /// Backend's scaled primal residual.
    pub feasibility_residual: f64,
    /// Relative duality gap.
    pub gap: f64,
    pub iterations: u32,
}

impl ConicSolution {
    fn failed(status: SolveStatus, n: usize) -> Self {
        ConicSolution {
            status,
            primal: vec![f64::NAN; n],
            objective_value: f64::NAN,
            feasibility_residual: f64::INFINITY,
            gap: f64::INFINITY,
            iterations: 0,
        }
    }
}

/// A convex solver for [`ConicProgram`].
pub trait ConicBackend {
    fn solve(&self, program: &ConicProgram) -> ConicSolution;
}

/// Settings for one solve attempt. An attempt that stalls just short of
/// the 1e-8 contract is retried with a differently perturbed one.
#[derive(Debug, Clone, Copy)]
struct Profile {
    equilibrate: bool,
    refine: bool,
    max_step_fraction: f64,
    static_regularization: f64,
}

const RETRY_PROFILES: [Profile; 4] = [
    Profile { equilibrate: true, refine: false, max_step_fraction: 0.99, static_regularization: 1e-8 },
    Profile { equilibrate: false, refine: false, max_step_fraction: 0.99, static_regularization: 1e-8 },
    Profile { equilibrate: true, refine: true, max_step_fraction: 0.9, static_regularization: 1e-8 },
    Profile { equilibrate: false, refine: true, max_step_fraction: 0.9, static_regularization: 1e-10 },
];

/// Clarabel interior-point backend.
#[derive(Debug, Clone)]
pub struct Clarabel {
    pub max_iter: u32,
    pub tol: f64,
    pub verbose: bool,
}

impl Default for Clarabel {
    fn default() -> Self {
        Clarabel { max_iter: 200, tol: 1e-8, verbose: false }
    }
}

/// Solves with the default backend.
pub fn solve(program: &ConicProgram) -> ConicSolution {
    Clarabel::default().solve(program)
}

/// Program with pinned variables substituted out and constant rows
/// folded. Rows are ordered zero, nonnegative, then one block per cone.
struct Presolved {
    /// Column of each original variable, or `None` when pinned.
    column: Vec<Option<usize>>,
    n_cols: usize,
    zero: Vec<AffExpr>,
    nonneg: Vec<AffExpr>,
    cones: Vec<(ConeKind, Vec<AffExpr>)>,
}

fn presolve(p: &ConicProgram) -> Result<Presolved, SolveStatus> {
    let mut column = vec![None; p.n_vars()];
    let mut n_cols = 0;
    for (i, c) in column.iter_mut().enumerate() {
        if !p.is_fixed(i) {
            *c = Some(n_cols);
            n_cols += 1;
        }
    }
    let substitute = |row: &AffExpr| {
        let mut out = AffExpr::constant(row.constant);
        for &(i, c) in &row.terms {
            match column[i] {
                Some(j) if c != 0.0 => out.terms.push((j, c)),
                Some(_) => {}
                None => out.constant += c * p.lower[i],
            }
        }
        out
    };
    let mut pre = Presolved { column: column.clone(), n_cols, zero: Vec::new(), nonneg: Vec::new(), cones: Vec::new() };
    for (i, col) in column.iter().enumerate() {
        if let Some(j) = *col {
            if p.lower[i].is_finite() {
                pre.nonneg.push(AffExpr::term(j, 1.0).plus_const(-p.lower[i]));
            }
            if p.upper[i].is_finite() {
                pre.nonneg.push(AffExpr::term(j, -1.0).plus_const(p.upper[i]));
            }
        }
    }
    for block in &p.blocks {
        let rows: Vec<AffExpr> = block.rows.iter().map(substitute).collect();
        match block.kind {
            ConeKind::Zero | ConeKind::Nonnegative => {
                for row in rows {
                    if row.terms.is_empty() {
                        if violation_of(block.kind, &[row.constant]) > CONSTANT_BLOCK_TOL {
                            return Err(SolveStatus::Infeasible);
                        }
                    } else if block.kind == ConeKind::Zero {
                        pre.zero.push(row);
                    } else {
                        pre.nonneg.push(row);
                    }
                }
            }
            kind => {
                if rows.iter().all(|r| r.terms.is_empty()) {
                    let v: Vec<f64> = rows.iter().map(|r| r.constant).collect();
                    if violation_of(kind, &v) > CONSTANT_BLOCK_TOL {
                        return Err(SolveStatus::Infeasible);
                    }
                } else {
                    pre.cones.push((kind, rows));
                }
            }
        }
    }
    Ok(pre)
}

impl ConicBackend for Clarabel {
    fn solve(&self, program: &ConicProgram) -> ConicSolution {
        let n = program.n_vars();
        if let Err(msg) = program.validate() {
            panic!("invalid conic program: {msg}");
        }
        let pre = match presolve(program) {
            Ok(pre) => pre,
            Err(status) => return ConicSolution::failed(status, n),
        };
        // Clarabel solves min c'x s.t. Ax + s = b, s in K. A row `g'x + h in K`
        // becomes A = -g, b = h.
        let (mut ri, mut cj, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut cones = Vec::new();
        let mut push_row = |row: &AffExpr, ri: &mut Vec<usize>, b: &mut Vec<f64>| {
            let r = b.len();
            for &(j, c) in &row.terms {
                ri.push(r);
                cj.push(j);
                vals.push(-c);
            }
            b.push(row.constant);
        };
        for row in &pre.zero {
            push_row(row, &mut ri, &mut b);
        }
        if !pre.zero.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(pre.zero.len()));
        }
        for row in &pre.nonneg {
            push_row(row, &mut ri, &mut b);
        }
        if !pre.nonneg.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(pre.nonneg.len()));
        }
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (kind, rows) in &pre.cones {
            match kind {
                ConeKind::SecondOrder => rows.iter().for_each(|row| push_row(row, &mut ri, &mut b)),
                ConeKind::RotatedSecondOrder => {
                    let (u, v) = (rows[0].clone(), rows[1].clone());
                    push_row(&((u.clone() + v.clone()) * r), &mut ri, &mut b);
                    push_row(&((u - v) * r), &mut ri, &mut b);
                    rows[2..].iter().for_each(|row| push_row(row, &mut ri, &mut b));
                }
                _ => unreachable!("linear rows are grouped above"),
            }
            cones.push(SupportedConeT::SecondOrderConeT(rows.len()));
        }
        let m = b.len();
        let a = CscMatrix::new_from_triplets(m, pre.n_cols, ri, cj, vals);
        let p = CscMatrix::zeros((pre.n_cols, pre.n_cols));
        let mut c = vec![0.0; pre.n_cols];
        let mut fixed_obj = 0.0;
        for (i, col) in pre.column.iter().enumerate() {
            match col {
                Some(j) => c[*j] = -program.objective[i],
                None => fixed_obj += program.objective[i] * program.lower[i],
            }
        }
        // Near the optimum the KKT solves of these programs sit right at the
        // accuracy the 1e-8 contract needs, and which settings get there
        // varies from program to program. Reduced-accuracy exits are retried
        // with the next profile; the sequence is fixed, so results stay
        // deterministic.
        let mut outcome = None;
        for profile in RETRY_PROFILES {
            let mut builder = DefaultSettingsBuilder::default();
            builder
                .verbose(self.verbose)
                .max_iter(self.max_iter)
                .tol_gap_rel(self.tol)
                .tol_gap_abs(self.tol)
                .tol_feas(self.tol)
                .equilibrate_enable(profile.equilibrate)
                .max_step_fraction(profile.max_step_fraction)
                .static_regularization_constant(profile.static_regularization)
                .max_threads(1);
            if profile.refine {
                builder
                    .iterative_refinement_max_iter(50)
                    .iterative_refinement_stop_ratio(1.5)
                    .iterative_refinement_reltol(1e-16)
                    .iterative_refinement_abstol(1e-16);
            }
            let settings = builder.build().expect("valid settings");
            let mut solver = match DefaultSolver::new(&p, &c, &a, &b, &cones, settings) {
                Ok(s) => s,
                Err(_) => return ConicSolution::failed(SolveStatus::NumericalLimit, n),
            };
            solver.solve();
            let status = match solver.solution.status {
                SolverStatus::Solved => SolveStatus::Optimal,
                SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
                SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
                _ => SolveStatus::NumericalLimit,
            };
            let retry = status == SolveStatus::NumericalLimit;
            outcome = Some((status, solver));
            if !retry {
                break;
            }
        }
        let (status, solver) = outcome.expect("at least one attempt");
        let primal: Vec<f64> = pre
            .column
            .iter()
            .enumerate()
            .map(|(i, col)| match col {
                Some(j) => solver.solution.x[*j],
                None => program.lower[i],
            })
            .collect();
        ConicSolution {
            status,
            objective_value: -solver.solution.obj_val + fixed_obj,
            primal,
            feasibility_residual: solver.info.res_primal,
            gap: solver.info.gap_rel,
            iterations: solver.solution.iterations,
        }
    }
}
