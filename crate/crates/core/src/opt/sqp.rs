//! Line-search SQP with an exact Lagrangian Hessian and an l1 merit function.
//!
//! Constraints are `c_E(z) = 0`, `c_I(z) <= 0` and simple bounds. Bounds are
//! kept hard: every iterate stays inside the box. The Lagrangian is
//! `f + lambda' c_E + mu' c_I`.

use nalgebra::{DMatrix, DVector};

use super::fd;
use super::linalg::{independent_rows, inf_norm, sym_eigen_sorted, sym_eigenvalues, RowSpaceSplit};
use super::qp::{solve_qp_with, QpOptions, QpProblem, QpSolution};
use super::{OptError, SolveOutcome, SolveStatus};

/// A smooth nonlinear program. Derivatives default to central differences.
pub trait NlpProblem {
    fn dim(&self) -> usize;

    fn objective(&self, z: &DVector<f64>) -> f64;

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        fd::gradient(|w| self.objective(w), z)
    }

    fn eq_dim(&self) -> usize {
        0
    }

    fn eq_residuals(&self, _z: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.eq_dim())
    }

    fn eq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        fd::jacobian(|w| self.eq_residuals(w), z, self.eq_dim())
    }

    fn ineq_dim(&self) -> usize {
        0
    }

    /// Values that must be `<= 0`.
    fn ineq_residuals(&self, _z: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.ineq_dim())
    }

    fn ineq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        fd::jacobian(|w| self.ineq_residuals(w), z, self.ineq_dim())
    }

    fn bounds(&self) -> (Option<DVector<f64>>, Option<DVector<f64>>) {
        (None, None)
    }

    /// True when every constraint is affine, so an infeasible QP subproblem
    /// proves the whole problem infeasible.
    fn constraints_affine(&self) -> bool {
        false
    }

    fn lagrangian_hessian(&self, z: &DVector<f64>, lambda: &DVector<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
        fd::hessian_from_gradient(
            |w| {
                let mut g = self.gradient(w);
                if lambda.len() > 0 {
                    g += self.eq_jacobian(w).transpose() * lambda;
                }
                if mu.len() > 0 {
                    g += self.ineq_jacobian(w).transpose() * mu;
                }
                g
            },
            z,
        )
    }
}

#[derive(Debug, Clone)]
pub struct SqpOptions {
    /// Stationarity and complementarity tolerance.
    pub tol: f64,
    /// Primal feasibility tolerance.
    pub feas_tol: f64,
    pub max_outer: usize,
    pub qp_tol: f64,
}

impl SqpOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, feas_tol: 1e-10, max_outer: 100, qp_tol: 1e-9 }
    }
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self::new(super::NONLINEAR_TOL)
    }
}

#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub z: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
    pub status: SolveStatus,
    /// Largest constraint violation at `z`.
    pub constraint_violation: f64,
    pub objective: f64,
}

impl NlpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status.is_optimal()
    }
}

struct Eval {
    f: f64,
    g: DVector<f64>,
    ce: DVector<f64>,
    je: DMatrix<f64>,
    ci: DVector<f64>,
    ji: DMatrix<f64>,
}

fn evaluate(p: &dyn NlpProblem, z: &DVector<f64>) -> Eval {
    let ne = p.eq_dim();
    let ni = p.ineq_dim();
    Eval {
        f: p.objective(z),
        g: p.gradient(z),
        ce: if ne > 0 { p.eq_residuals(z) } else { DVector::zeros(0) },
        je: if ne > 0 { p.eq_jacobian(z) } else { DMatrix::zeros(0, z.len()) },
        ci: if ni > 0 { p.ineq_residuals(z) } else { DVector::zeros(0) },
        ji: if ni > 0 { p.ineq_jacobian(z) } else { DMatrix::zeros(0, z.len()) },
    }
}

fn l1_violation(ce: &DVector<f64>, ci: &DVector<f64>) -> f64 {
    ce.iter().map(|v| v.abs()).sum::<f64>() + ci.iter().map(|v| v.max(0.0)).sum::<f64>()
}

fn max_violation(ce: &DVector<f64>, ci: &DVector<f64>) -> f64 {
    inf_norm(ce).max(ci.iter().fold(0.0, |a, v| a.max(*v)))
}

fn residuals(p: &dyn NlpProblem, z: &DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let ce = if p.eq_dim() > 0 { p.eq_residuals(z) } else { DVector::zeros(0) };
    let ci = if p.ineq_dim() > 0 { p.ineq_residuals(z) } else { DVector::zeros(0) };
    (p.objective(z), ce, ci)
}

fn step_bounds(
    lower: &Option<DVector<f64>>,
    upper: &Option<DVector<f64>>,
    z: &DVector<f64>,
) -> (Option<DVector<f64>>, Option<DVector<f64>>) {
    (lower.as_ref().map(|l| l - z), upper.as_ref().map(|u| u - z))
}

fn clamp(lower: &Option<DVector<f64>>, upper: &Option<DVector<f64>>, z: &mut DVector<f64>) {
    for i in 0..z.len() {
        if let Some(l) = lower {
            z[i] = z[i].max(l[i]);
        }
        if let Some(u) = upper {
            z[i] = z[i].min(u[i]);
        }
    }
}

fn build_qp(
    h: DMatrix<f64>,
    g: DVector<f64>,
    je: &DMatrix<f64>,
    ce: &DVector<f64>,
    ji: &DMatrix<f64>,
    ci: &DVector<f64>,
    bounds: &(Option<DVector<f64>>, Option<DVector<f64>>),
) -> QpProblem {
    let mut qp = QpProblem::new(h, g).with_equalities(je.clone(), -ce).with_inequalities(ji.clone(), -ci);
    qp.lower = bounds.0.clone();
    qp.upper = bounds.1.clone();
    qp
}

/// Adds a diagonal shift so the matrix is positive definite.
fn convexify(h: &DMatrix<f64>, attempt: u32) -> DMatrix<f64> {
    let eig = sym_eigenvalues(h);
    let lo = eig.first().copied().unwrap_or(0.0);
    let hi = eig.last().copied().unwrap_or(0.0).abs().max(1.0);
    let shift = (1e-8 * hi - lo).max(0.0) * 2f64.powi(attempt as i32) + 1e-8 * hi * attempt as f64;
    let mut out = h.clone();
    for i in 0..h.nrows() {
        out[(i, i)] += shift;
    }
    out
}

struct Kkt {
    stationarity: f64,
    complementarity: f64,
    violation: f64,
}

fn kkt(e: &Eval, qp: &QpSolution) -> Kkt {
    let mut stat = e.g.clone();
    if e.ce.len() > 0 {
        stat += e.je.transpose() * &qp.eq_multipliers;
    }
    if e.ci.len() > 0 {
        stat += e.ji.transpose() * &qp.ineq_multipliers;
    }
    stat += &qp.upper_multipliers - &qp.lower_multipliers;
    let stationarity = inf_norm(&stat) / (1.0 + inf_norm(&e.g));
    let complementarity = e
        .ci
        .iter()
        .zip(qp.ineq_multipliers.iter())
        .fold(0.0f64, |a, (c, m)| a.max((c * m).abs()));
    Kkt { stationarity, complementarity, violation: max_violation(&e.ce, &e.ci) }
}

struct Best {
    z: DVector<f64>,
    f: f64,
}

/// Solves `p` from `z0` (projected onto the bounds first).
pub fn solve_nlp(p: &dyn NlpProblem, z0: &DVector<f64>, opts: &SqpOptions) -> Result<NlpSolution, OptError> {
    let d = p.dim();
    if z0.len() != d {
        return Err(OptError::Dimension("initial point".into()));
    }
    if z0.iter().any(|v| !v.is_finite()) {
        return Err(OptError::NonFinite("initial point"));
    }
    let (lower, upper) = p.bounds();
    let ne = p.eq_dim();
    let ni = p.ineq_dim();
    let mut z = z0.clone();
    clamp(&lower, &upper, &mut z);

    let mut lambda = DVector::zeros(ne);
    let mut mu = DVector::zeros(ni);
    let mut rho = 1.0f64;
    let mut steps = 0usize;
    let mut best: Option<Best> = None;
    let mut last_kkt = f64::INFINITY;
    let mut restoration_stall = 0usize;

    let finish = |z: DVector<f64>, lambda: DVector<f64>, mu: DVector<f64>, outcome, kkt_res, steps| {
        let (f, ce, ci) = residuals(p, &z);
        NlpSolution {
            constraint_violation: max_violation(&ce, &ci),
            objective: f,
            z,
            eq_multipliers: lambda,
            ineq_multipliers: mu,
            status: SolveStatus::new(outcome, kkt_res, steps),
        }
    };

    for _outer in 0..opts.max_outer {
        let e = evaluate(p, &z);
        if !e.f.is_finite() || e.g.iter().any(|v| !v.is_finite()) {
            return Ok(finish(z, lambda, mu, SolveOutcome::NumericalFailure, f64::INFINITY, steps));
        }
        let viol = max_violation(&e.ce, &e.ci);
        if viol <= opts.feas_tol && best.as_ref().map_or(true, |b| e.f < b.f) {
            best = Some(Best { z: z.clone(), f: e.f });
        }
        let bounds = step_bounds(&lower, &upper, &z);
        let h_exact = p.lagrangian_hessian(&z, &lambda, &mu);

        // QP subproblem, convexified on failure
        let mut qp_sol: Option<QpSolution> = None;
        let mut h_used = h_exact.clone();
        let mut infeasible = false;
        for attempt in 0..4u32 {
            let h = if attempt == 0 { h_exact.clone() } else { convexify(&h_exact, attempt) };
            let qp = build_qp(h.clone(), e.g.clone(), &e.je, &e.ce, &e.ji, &e.ci, &bounds);
            let sol = solve_qp_with(&qp, &QpOptions::new(opts.qp_tol))?;
            if sol.status.outcome == SolveOutcome::Infeasible {
                infeasible = true;
                break;
            }
            if sol.is_optimal() {
                let dir = e.g.dot(&sol.z) - rho.max(max_mult(&sol) * 1.1) * l1_violation(&e.ce, &e.ci);
                let small = inf_norm(&sol.z) <= 1e-12 * (1.0 + inf_norm(&z));
                if dir < 0.0 || small || sol.z.dot(&(&h * &sol.z)) > 0.0 {
                    h_used = h;
                    qp_sol = Some(sol);
                    break;
                }
            }
        }

        if infeasible && p.constraints_affine() {
            return Ok(finish(z, lambda, mu, SolveOutcome::Infeasible, viol, steps));
        }
        if infeasible {
            // Gauss-Newton step on the linearized violation
            match restoration_step(p, &e, &z, &bounds, opts.qp_tol)? {
                Some(znew) => {
                    let (_, ce0, ci0) = (e.f, &e.ce, &e.ci);
                    let (_, ce1, ci1) = residuals(p, &znew);
                    let v0 = sq_violation(ce0, ci0);
                    let v1 = sq_violation(&ce1, &ci1);
                    if v0 - v1 < 1e-12 {
                        restoration_stall += 1;
                    } else {
                        restoration_stall = 0;
                    }
                    z = znew;
                    steps += 1;
                    if restoration_stall >= 10 {
                        return Ok(finish(z, lambda, mu, SolveOutcome::Infeasible, viol, steps));
                    }
                    continue;
                }
                None => return Ok(finish(z, lambda, mu, SolveOutcome::Infeasible, viol, steps)),
            }
        }
        restoration_stall = 0;

        let Some(qp_sol) = qp_sol else {
            return Ok(give_up(p, best, z, lambda, mu, SolveOutcome::NumericalFailure, last_kkt, steps, &finish));
        };

        let k = kkt(&e, &qp_sol);
        last_kkt = k.stationarity.max(k.complementarity).max(k.violation);
        let dz = qp_sol.z.clone();
        if k.stationarity <= opts.tol && k.complementarity <= opts.tol && k.violation <= opts.feas_tol {
            return Ok(finish(z, qp_sol.eq_multipliers, qp_sol.ineq_multipliers, SolveOutcome::Optimal, last_kkt, steps));
        }
        if inf_norm(&dz) <= 1e-15 * (1.0 + inf_norm(&z)) {
            // no progress possible from here
            return Ok(give_up(p, best, z, lambda, mu, SolveOutcome::NumericalFailure, last_kkt, steps, &finish));
        }

        rho = rho.max(1.1 * max_mult(&qp_sol));
        let merit = |f: f64, ce: &DVector<f64>, ci: &DVector<f64>| f + rho * l1_violation(ce, ci);
        let phi0 = merit(e.f, &e.ce, &e.ci);
        let dphi = (e.g.dot(&dz) - rho * l1_violation(&e.ce, &e.ci)).min(0.0);
        let armijo = 1e-4;

        let mut alpha = 1.0;
        let mut accepted: Option<DVector<f64>> = None;
        let mut tried_soc = false;
        while alpha >= 1e-10 {
            let mut trial = &z + alpha * &dz;
            clamp(&lower, &upper, &mut trial);
            let (ft, cet, cit) = residuals(p, &trial);
            let phit = merit(ft, &cet, &cit);
            if phit.is_finite() && phit <= phi0 + armijo * alpha * dphi + 1e-14 * phi0.abs().max(1.0) {
                accepted = Some(trial);
                break;
            }
            if !tried_soc && alpha == 1.0 && (ne + ni) > 0 {
                tried_soc = true;
                // second-order correction for the curvature of the constraints
                let ce_c = &cet - &e.je * &dz;
                let ci_c = &cit - &e.ji * &dz;
                let qp = build_qp(h_used.clone(), e.g.clone(), &e.je, &ce_c, &e.ji, &ci_c, &bounds);
                let sol = solve_qp_with(&qp, &QpOptions::new(opts.qp_tol))?;
                if sol.is_optimal() {
                    let mut t2 = &z + &sol.z;
                    clamp(&lower, &upper, &mut t2);
                    let (f2, ce2, ci2) = residuals(p, &t2);
                    let phi2 = merit(f2, &ce2, &ci2);
                    if phi2.is_finite() && phi2 <= phi0 + armijo * dphi {
                        accepted = Some(t2);
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some(znew) = accepted else {
            return Ok(give_up(p, best, z, lambda, mu, SolveOutcome::NumericalFailure, last_kkt, steps, &finish));
        };
        z = znew;
        lambda = qp_sol.eq_multipliers;
        mu = qp_sol.ineq_multipliers;
        steps += 1;
    }

    Ok(give_up(p, best, z, lambda, mu, SolveOutcome::MaxIter, last_kkt, steps, &finish))
}

/// Direction of most negative curvature of the Lagrangian on the tangent
/// space of the active constraints at an optimal `sol`, if any.
pub fn negative_curvature(p: &dyn NlpProblem, sol: &NlpSolution) -> Option<DVector<f64>> {
    let z = &sol.z;
    let d = z.len();
    let (lower, upper) = p.bounds();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    if p.eq_dim() > 0 {
        let je = p.eq_jacobian(z);
        rows.extend(je.row_iter().map(|r| r.transpose()));
    }
    if p.ineq_dim() > 0 {
        let ci = p.ineq_residuals(z);
        let ji = p.ineq_jacobian(z);
        rows.extend((0..ci.len()).filter(|&i| ci[i] >= -1e-8).map(|i| ji.row(i).transpose()));
    }
    for i in 0..d {
        let at_lower = lower.as_ref().is_some_and(|l| z[i] - l[i] <= 1e-9);
        let at_upper = upper.as_ref().is_some_and(|u| u[i] - z[i] <= 1e-9);
        if at_lower || at_upper {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            rows.push(e);
        }
    }
    let null = if rows.is_empty() {
        DMatrix::identity(d, d)
    } else {
        let a = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        let keep = independent_rows(&a, 1e-10);
        let a = DMatrix::from_fn(keep.len(), d, |i, j| a[(keep[i], j)]);
        RowSpaceSplit::new(&a, 1e-12)?.null
    };
    if null.ncols() == 0 {
        return None;
    }
    let h = p.lagrangian_hessian(z, &sol.eq_multipliers, &sol.ineq_multipliers);
    let reduced = null.transpose() * &h * &null;
    let (vals, vecs) = sym_eigen_sorted(&reduced);
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if vals[0] < -1e-8 * scale {
        Some(&null * vecs.column(0))
    } else {
        None
    }
}

type Finish<'a> = dyn Fn(DVector<f64>, DVector<f64>, DVector<f64>, SolveOutcome, f64, usize) -> NlpSolution + 'a;

/// Returns the best feasible iterate seen, or the current point if none.
#[allow(clippy::too_many_arguments)]
fn give_up(
    p: &dyn NlpProblem,
    best: Option<Best>,
    z: DVector<f64>,
    lambda: DVector<f64>,
    mu: DVector<f64>,
    outcome: SolveOutcome,
    kkt_res: f64,
    steps: usize,
    finish: &Finish<'_>,
) -> NlpSolution {
    let (fz, ce, ci) = residuals(p, &z);
    let current_feasible = max_violation(&ce, &ci) <= 1e-10;
    match best {
        Some(b) if !current_feasible || b.f < fz => finish(b.z, lambda, mu, outcome, kkt_res, steps),
        _ => finish(z, lambda, mu, outcome, kkt_res, steps),
    }
}

fn max_mult(s: &QpSolution) -> f64 {
    inf_norm(&s.eq_multipliers).max(inf_norm(&s.ineq_multipliers))
}

fn sq_violation(ce: &DVector<f64>, ci: &DVector<f64>) -> f64 {
    0.5 * (ce.norm_squared() + ci.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>())
}

/// One restoration step: minimizes the squared linearized violation plus a
/// small proximal term, then backtracks on the true squared violation.
fn restoration_step(
    p: &dyn NlpProblem,
    e: &Eval,
    z: &DVector<f64>,
    bounds: &(Option<DVector<f64>>, Option<DVector<f64>>),
    qp_tol: f64,
) -> Result<Option<DVector<f64>>, OptError> {
    let d = z.len();
    let ne = e.ce.len();
    let ni = e.ci.len();
    let dim = d + ne + ni;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..d {
        h[(i, i)] = 1e-8;
    }
    for i in d..dim {
        h[(i, i)] = 1.0;
    }
    // je d - r = -ce ; ji d - s <= -ci ; s >= 0
    let mut aeq = DMatrix::zeros(ne, dim);
    aeq.view_mut((0, 0), (ne, d)).copy_from(&e.je);
    for i in 0..ne {
        aeq[(i, d + i)] = -1.0;
    }
    let mut ain = DMatrix::zeros(ni, dim);
    ain.view_mut((0, 0), (ni, d)).copy_from(&e.ji);
    for i in 0..ni {
        ain[(i, d + ne + i)] = -1.0;
    }
    let mut lb = DVector::from_element(dim, f64::NEG_INFINITY);
    let mut ub = DVector::from_element(dim, f64::INFINITY);
    if let Some(l) = &bounds.0 {
        lb.rows_mut(0, d).copy_from(l);
    }
    if let Some(u) = &bounds.1 {
        ub.rows_mut(0, d).copy_from(u);
    }
    for i in 0..ni {
        lb[d + ne + i] = 0.0;
    }
    let mut guess = DVector::zeros(dim);
    guess.rows_mut(d, ne).copy_from(&e.ce);
    for i in 0..ni {
        guess[d + ne + i] = e.ci[i].max(0.0);
    }
    let qp = QpProblem::new(h, DVector::zeros(dim))
        .with_equalities(aeq, -&e.ce)
        .with_inequalities(ain, -&e.ci)
        .with_bounds(lb, ub);
    let mut o = QpOptions::new(qp_tol);
    o.initial_guess = Some(guess);
    let sol = solve_qp_with(&qp, &o)?;
    if !sol.is_optimal() {
        return Ok(None);
    }
    let dz = sol.z.rows(0, d).clone_owned();
    let v0 = sq_violation(&e.ce, &e.ci);
    let mut alpha = 1.0;
    while alpha >= 1e-10 {
        let trial = z + alpha * &dz;
        let (_, ce, ci) = residuals(p, &trial);
        let v = sq_violation(&ce, &ci);
        if v.is_finite() && v < v0 {
            return Ok(Some(trial));
        }
        alpha *= 0.5;
    }
    Ok(Some(z.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::solve_qp;

    struct CircleProj;

    impl NlpProblem for CircleProj {
        fn dim(&self) -> usize {
            1
        }
        fn objective(&self, z: &DVector<f64>) -> f64 {
            (z[0] - 3.0).powi(2)
        }
        fn eq_dim(&self) -> usize {
            1
        }
        fn eq_residuals(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, z[0] * z[0] - 4.0)
        }
    }

    #[test]
    fn nonlinear_equality_from_one() {
        let s = solve_nlp(&CircleProj, &DVector::from_element(1, 1.0), &SqpOptions::default()).unwrap();
        assert!(s.is_optimal(), "{:?}", s.status);
        assert!((s.z[0] - 2.0).abs() < 1e-6);
    }

    struct BoxedQuadratic;

    impl NlpProblem for BoxedQuadratic {
        fn dim(&self) -> usize {
            2
        }
        fn objective(&self, z: &DVector<f64>) -> f64 {
            (z[0] - 2.0).powi(2) + 0.5 * (z[1] + 1.0).powi(2) + z[0] * z[1]
        }
        fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![2.0 * (z[0] - 2.0) + z[1], (z[1] + 1.0) + z[0]])
        }
        fn ineq_dim(&self) -> usize {
            1
        }
        fn ineq_residuals(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, z[0] + z[1] - 0.5)
        }
        fn ineq_jacobian(&self, _z: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0])
        }
        fn bounds(&self) -> (Option<DVector<f64>>, Option<DVector<f64>>) {
            (Some(DVector::from_vec(vec![-1.0, -1.0])), Some(DVector::from_vec(vec![1.0, 1.0])))
        }
        fn lagrangian_hessian(&self, _z: &DVector<f64>, _l: &DVector<f64>, _m: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])
        }
    }

    #[test]
    fn quadratic_program_takes_one_step() {
        let s = solve_nlp(&BoxedQuadratic, &DVector::zeros(2), &SqpOptions::new(1e-9)).unwrap();
        assert!(s.is_optimal(), "{:?}", s.status);
        assert_eq!(s.status.iterations, 1);
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let qp = QpProblem::new(h, DVector::from_vec(vec![-4.0, 1.0]))
            .with_inequalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 0.5))
            .with_bounds(DVector::from_vec(vec![-1.0, -1.0]), DVector::from_vec(vec![1.0, 1.0]));
        let q = solve_qp(&qp, 1e-9).unwrap();
        assert!((&s.z - &q.z).amax() < 1e-9);
    }

    struct Disjoint;

    impl NlpProblem for Disjoint {
        fn dim(&self) -> usize {
            1
        }
        fn objective(&self, z: &DVector<f64>) -> f64 {
            z[0] * z[0]
        }
        fn eq_dim(&self) -> usize {
            1
        }
        // z^2 + 1 = 0 has no real root
        fn eq_residuals(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, z[0] * z[0] + 1.0)
        }
    }

    #[test]
    fn unreachable_constraint_is_infeasible() {
        let s = solve_nlp(&Disjoint, &DVector::from_element(1, 0.7), &SqpOptions::default()).unwrap();
        assert_eq!(s.status.outcome, SolveOutcome::Infeasible);
        assert!(s.constraint_violation > 0.5);
    }
}
