//! Primal active-set QP solver with an elastic phase-1.
//!
//! Solves
//!
//! ```text
//!     minimize    1/2 z' H z + g' z
//!     subject to  Aeq z = beq,  Aineq z <= bineq,  lb <= z <= ub
//! ```
//!
//! Bounds with `lb == ub` are treated as equalities. Phase 1 finds a feasible
//! point by a short sequence of proximal elastic QPs (each of which has a
//! trivially feasible start); if the elastic residual cannot be driven to
//! zero the problem is reported infeasible together with the phase-1
//! multipliers as a Farkas certificate.

use nalgebra::{DMatrix, DVector};

use super::linalg::{independent_rows, inf_norm, sym_eigenvalues, RowSpaceSplit};
use super::{OptError, SolveOutcome, SolveStatus};

const MAX_CHANGES: usize = 500;
const PROX_WEIGHT: f64 = 1e-6;
const MAX_PROX: usize = 40;
const MAX_REG: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub lower: Option<DVector<f64>>,
    pub upper: Option<DVector<f64>>,
}

impl QpProblem {
    pub fn new(hessian: DMatrix<f64>, gradient: DVector<f64>) -> Self {
        let d = gradient.len();
        Self {
            hessian,
            gradient,
            a_eq: DMatrix::zeros(0, d),
            b_eq: DVector::zeros(0),
            a_ineq: DMatrix::zeros(0, d),
            b_ineq: DVector::zeros(0),
            lower: None,
            upper: None,
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_ineq = a;
        self.b_ineq = b;
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.hessian * z)) + self.gradient.dot(z)
    }

    /// Largest violation of any constraint at `z`.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        if self.a_eq.nrows() > 0 {
            v = v.max(inf_norm(&(&self.a_eq * z - &self.b_eq)));
        }
        if self.a_ineq.nrows() > 0 {
            let r = &self.a_ineq * z - &self.b_ineq;
            v = v.max(r.iter().fold(0.0, |a, x| a.max(*x)));
        }
        for i in 0..z.len() {
            if let Some(lb) = &self.lower {
                v = v.max(lb[i] - z[i]);
            }
            if let Some(ub) = &self.upper {
                v = v.max(z[i] - ub[i]);
            }
        }
        v
    }

    fn validate(&self) -> Result<(), OptError> {
        let d = self.dim();
        let dim_err = |what: &str| Err(OptError::Dimension(what.to_string()));
        if self.hessian.shape() != (d, d) {
            return dim_err("hessian must be d x d");
        }
        if self.a_eq.ncols() != d || self.a_eq.nrows() != self.b_eq.len() {
            return dim_err("equality block");
        }
        if self.a_eq.nrows() > d {
            return dim_err("more equalities than variables");
        }
        if self.a_ineq.ncols() != d || self.a_ineq.nrows() != self.b_ineq.len() {
            return dim_err("inequality block");
        }
        for b in [&self.lower, &self.upper].into_iter().flatten() {
            if b.len() != d {
                return dim_err("bounds");
            }
        }
        if let (Some(lb), Some(ub)) = (&self.lower, &self.upper) {
            if lb.iter().zip(ub.iter()).any(|(l, u)| l > u) {
                return dim_err("lower bound above upper bound");
            }
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !finite(&self.hessian) || !self.gradient.iter().all(|v| v.is_finite()) {
            return Err(OptError::NonFinite("objective"));
        }
        if !finite(&self.a_eq) || !finite(&self.a_ineq) || !self.b_eq.iter().all(|v| v.is_finite()) {
            return Err(OptError::NonFinite("constraints"));
        }
        if self.b_ineq.iter().any(|v| v.is_nan()) {
            return Err(OptError::NonFinite("constraints"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QpOptions {
    pub tol: f64,
    pub max_changes: usize,
    pub initial_guess: Option<DVector<f64>>,
}

impl QpOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_changes: MAX_CHANGES, initial_guess: None }
    }
}

/// Multipliers proving infeasibility: nonnegative weights on `<=` rows and
/// free weights on equalities whose combination annihilates `z` while the
/// same combination of right-hand sides is negative.
#[derive(Debug, Clone)]
pub struct FarkasCertificate {
    pub eq: DVector<f64>,
    pub ineq: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl FarkasCertificate {
    /// Returns `(|A' y|_inf, b' y)`; a valid certificate has the first
    /// near zero relative to the second, and the second strictly negative.
    pub fn check(&self, p: &QpProblem) -> (f64, f64) {
        let d = p.dim();
        let mut comb = DVector::zeros(d);
        let mut rhs = 0.0;
        if p.a_eq.nrows() > 0 {
            comb += p.a_eq.transpose() * &self.eq;
            rhs += p.b_eq.dot(&self.eq);
        }
        if p.a_ineq.nrows() > 0 {
            comb += p.a_ineq.transpose() * &self.ineq;
            rhs += p.b_ineq.dot(&self.ineq);
        }
        for j in 0..d {
            if self.upper[j] != 0.0 {
                comb[j] += self.upper[j];
                rhs += self.upper[j] * p.upper.as_ref().map_or(f64::INFINITY, |u| u[j]);
            }
            if self.lower[j] != 0.0 {
                comb[j] -= self.lower[j];
                rhs -= self.lower[j] * p.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l[j]);
            }
        }
        (inf_norm(&comb), rhs)
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
    pub lower_multipliers: DVector<f64>,
    pub upper_multipliers: DVector<f64>,
    pub status: SolveStatus,
    /// Levenberg shift added to the Hessian (0 when it was not needed).
    pub regularization: f64,
    pub certificate: Option<FarkasCertificate>,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status.is_optimal()
    }
}

pub fn solve_qp(p: &QpProblem, tol: f64) -> Result<QpSolution, OptError> {
    solve_qp_with(p, &QpOptions::new(tol))
}

#[derive(Debug, Clone, Copy)]
enum EqSource {
    Row(usize),
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum IneqSource {
    Row(usize),
    Upper(usize),
    Lower(usize),
}

/// All constraints as `ae z = be` (independent rows) and `ai z <= bi`.
struct Standard {
    ae: DMatrix<f64>,
    be: DVector<f64>,
    eq_src: Vec<EqSource>,
    /// Every equality row, including dependent ones, for residual checks.
    ae_all: DMatrix<f64>,
    be_all: DVector<f64>,
    ai: DMatrix<f64>,
    bi: DVector<f64>,
    ineq_src: Vec<IneqSource>,
}

impl Standard {
    fn build(p: &QpProblem) -> Self {
        let d = p.dim();
        let mut eq_rows: Vec<(DVector<f64>, f64, EqSource)> = Vec::new();
        for i in 0..p.a_eq.nrows() {
            eq_rows.push((p.a_eq.row(i).transpose(), p.b_eq[i], EqSource::Row(i)));
        }
        let mut ineq_rows: Vec<(DVector<f64>, f64, IneqSource)> = Vec::new();
        for i in 0..p.a_ineq.nrows() {
            if p.b_ineq[i] == f64::INFINITY {
                continue;
            }
            ineq_rows.push((p.a_ineq.row(i).transpose(), p.b_ineq[i], IneqSource::Row(i)));
        }
        for j in 0..d {
            let lb = p.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l[j]);
            let ub = p.upper.as_ref().map_or(f64::INFINITY, |u| u[j]);
            let mut e = DVector::zeros(d);
            e[j] = 1.0;
            if lb == ub {
                eq_rows.push((e, lb, EqSource::Fixed(j)));
                continue;
            }
            if ub.is_finite() {
                ineq_rows.push((e.clone(), ub, IneqSource::Upper(j)));
            }
            if lb.is_finite() {
                ineq_rows.push((-e, -lb, IneqSource::Lower(j)));
            }
        }
        let stack = |rows: &[(DVector<f64>, f64)]| {
            let mut a = DMatrix::zeros(rows.len(), d);
            let mut b = DVector::zeros(rows.len());
            for (i, (r, v)) in rows.iter().enumerate() {
                a.set_row(i, &r.transpose());
                b[i] = *v;
            }
            (a, b)
        };
        let eq_pairs: Vec<_> = eq_rows.iter().map(|(r, v, _)| (r.clone(), *v)).collect();
        let (ae_all, be_all) = stack(&eq_pairs);
        let keep = independent_rows(&ae_all, 1e-10);
        let kept_pairs: Vec<_> = keep.iter().map(|&i| eq_pairs[i].clone()).collect();
        let (ae, be) = stack(&kept_pairs);
        let eq_src = keep.iter().map(|&i| eq_rows[i].2).collect();
        let ineq_pairs: Vec<_> = ineq_rows.iter().map(|(r, v, _)| (r.clone(), *v)).collect();
        let (ai, bi) = stack(&ineq_pairs);
        let ineq_src = ineq_rows.iter().map(|r| r.2).collect();
        Self { ae, be, eq_src, ae_all, be_all, ai, bi, ineq_src }
    }

    fn violation(&self, z: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        if self.ae_all.nrows() > 0 {
            v = v.max(inf_norm(&(&self.ae_all * z - &self.be_all)));
        }
        if self.ai.nrows() > 0 {
            let r = &self.ai * z - &self.bi;
            v = v.max(r.iter().fold(0.0, |a, x| a.max(*x)));
        }
        v
    }
}

struct ActiveSetResult {
    z: DVector<f64>,
    eq_mult: DVector<f64>,
    ineq_mult: DVector<f64>,
    changes: usize,
    reg: f64,
}

#[derive(Debug)]
enum ActiveSetFailure {
    MaxIter(DVector<f64>, usize),
    Numerical(DVector<f64>, usize),
}

fn objective_scale(h: &DMatrix<f64>, g: &DVector<f64>, z: &DVector<f64>) -> f64 {
    let hmax = h.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    1.0 + inf_norm(g) + hmax * (1.0 + inf_norm(z))
}

/// Equality-constrained subproblem on the rows `a z = b`: returns the
/// minimizer and the multipliers of the rows.
fn solve_eqp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    reg: &mut f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let d = g.len();
    let split = RowSpaceSplit::new(a, 1e-13)?;
    let zp = split.particular(b);
    let z_null = &split.null;
    let k = z_null.ncols();
    let shifted = |reg: f64| {
        let mut hr = h.clone();
        for i in 0..d {
            hr[(i, i)] += reg;
        }
        hr
    };
    let mut hreg = shifted(*reg);
    let zt = if k == 0 {
        zp
    } else {
        let reduced_of = |hm: &DMatrix<f64>| {
            let r = z_null.transpose() * hm * z_null;
            (&r + r.transpose()) * 0.5
        };
        let mut reduced = reduced_of(&hreg);
        loop {
            let eig = sym_eigenvalues(&reduced);
            let lo = eig[0];
            let hi = eig[eig.len() - 1].abs().max(1.0);
            if lo > 1e-12 * hi {
                break;
            }
            *reg = if *reg == 0.0 { 1e-10 } else { *reg * 2.0 };
            if *reg > MAX_REG {
                return None;
            }
            hreg = shifted(*reg);
            reduced = reduced_of(&hreg);
        }
        let rhs = -(z_null.transpose() * (&hreg * &zp + g));
        let chol = reduced.cholesky()?;
        let w = chol.solve(&rhs);
        zp + z_null * w
    };
    let nu = split.multipliers(&(-(&hreg * &zt + g)));
    Some((zt, nu))
}

/// Primal active-set iterations from a feasible `z`.
fn active_set(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    std: &Standard,
    mut z: DVector<f64>,
    max_changes: usize,
    mut reg: f64,
) -> Result<ActiveSetResult, ActiveSetFailure> {
    let d = g.len();
    let p_eq = std.ae.nrows();
    let q = std.ai.nrows();
    let act_tol = 1e-11 * (1.0 + inf_norm(&z));

    // Initial working set: active or violated rows, kept independent.
    let mut working: Vec<usize> = Vec::new();
    {
        let candidates: Vec<usize> = (0..q)
            .filter(|&i| std.ai.row(i).dot(&z.transpose()) >= std.bi[i] - act_tol)
            .collect();
        if !candidates.is_empty() {
            let mut stacked = DMatrix::zeros(p_eq + candidates.len(), d);
            for i in 0..p_eq {
                stacked.set_row(i, &std.ae.row(i));
            }
            for (k, &c) in candidates.iter().enumerate() {
                stacked.set_row(p_eq + k, &std.ai.row(c));
            }
            let keep = independent_rows(&stacked, 1e-9);
            working = keep.into_iter().filter(|&k| k >= p_eq).map(|k| candidates[k - p_eq]).collect();
        }
    }

    let mut changes = 0usize;
    loop {
        let rows = p_eq + working.len();
        let mut a = DMatrix::zeros(rows, d);
        let mut b = DVector::zeros(rows);
        for i in 0..p_eq {
            a.set_row(i, &std.ae.row(i));
            b[i] = std.be[i];
        }
        for (k, &w) in working.iter().enumerate() {
            a.set_row(p_eq + k, &std.ai.row(w));
            b[p_eq + k] = std.bi[w];
        }
        let Some((zt, nu)) = solve_eqp(h, g, &a, &b, &mut reg) else {
            return Err(ActiveSetFailure::Numerical(z, changes));
        };
        let step = &zt - &z;
        let step_norm = inf_norm(&step);
        if step_norm <= 1e-11 * (1.0 + inf_norm(&z)) {
            z = zt;
            let scale = objective_scale(h, g, &z);
            // most negative multiplier, lowest index on ties
            let mut drop: Option<(usize, f64)> = None;
            for k in 0..working.len() {
                let mu = nu[p_eq + k];
                if mu < -1e-12 * scale {
                    match drop {
                        Some((_, best)) if mu >= best => {}
                        _ => drop = Some((k, mu)),
                    }
                }
            }
            match drop {
                None => {
                    let mut ineq_mult = DVector::zeros(q);
                    for (k, &w) in working.iter().enumerate() {
                        ineq_mult[w] = nu[p_eq + k].max(0.0);
                    }
                    let eq_mult = nu.rows(0, p_eq).clone_owned();
                    return Ok(ActiveSetResult { z, eq_mult, ineq_mult, changes, reg });
                }
                Some((k, _)) => {
                    working.remove(k);
                    changes += 1;
                }
            }
        } else {
            // ratio test over rows outside the working set
            let pnorm = step.norm();
            let mut ratios: Vec<(f64, usize)> = Vec::new();
            for i in 0..q {
                if working.contains(&i) {
                    continue;
                }
                let row = std.ai.row(i);
                let ap = row.dot(&step.transpose());
                if ap <= 1e-14 * row.norm() * pnorm {
                    continue;
                }
                let slack = (std.bi[i] - row.dot(&z.transpose())).max(0.0);
                let ai = slack / ap;
                if ai < 1.0 {
                    ratios.push((ai, i));
                }
            }
            ratios.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            // a row in the span of the working set only blocks through
            // rounding; adding it would make the working set singular
            let mut alpha = 1.0;
            let mut blocking: Option<usize> = None;
            for (ai, i) in ratios {
                let mut stacked = DMatrix::zeros(rows + 1, d);
                stacked.view_mut((0, 0), (rows, d)).copy_from(&a);
                stacked.set_row(rows, &std.ai.row(i));
                if independent_rows(&stacked, 1e-9).len() == rows + 1 {
                    alpha = ai;
                    blocking = Some(i);
                    break;
                }
            }
            z += alpha * &step;
            if let Some(i) = blocking {
                let pos = working.partition_point(|&w| w < i);
                working.insert(pos, i);
                changes += 1;
            }
        }
        if changes > max_changes {
            return Err(ActiveSetFailure::MaxIter(z, changes));
        }
    }
}

struct PhaseOne {
    z: DVector<f64>,
    feasible: bool,
    changes: usize,
    certificate: Option<FarkasCertificate>,
}

/// Proximal elastic phase 1. Slacks are attached to equality rows and to
/// general inequality rows; bound rows stay hard.
fn phase_one(p: &QpProblem, std: &Standard, z0: DVector<f64>, tol: f64, max_changes: usize) -> Result<PhaseOne, ActiveSetFailure> {
    let d = p.dim();
    let pe = std.ae.nrows();
    let elastic: Vec<usize> = (0..std.ai.nrows())
        .filter(|&i| matches!(std.ineq_src[i], IneqSource::Row(_)))
        .collect();
    let hard: Vec<usize> = (0..std.ai.nrows())
        .filter(|&i| !matches!(std.ineq_src[i], IneqSource::Row(_)))
        .collect();
    let ne = elastic.len();
    let dim = d + pe + ne;

    // extended constraint set in standard form
    let mut ae = DMatrix::zeros(pe, dim);
    for i in 0..pe {
        ae.view_mut((i, 0), (1, d)).copy_from(&std.ae.row(i));
        ae[(i, d + i)] = -1.0;
    }
    let rows = ne + ne + hard.len();
    let mut ai = DMatrix::zeros(rows, dim);
    let mut bi = DVector::zeros(rows);
    let mut src = Vec::with_capacity(rows);
    for (k, &i) in elastic.iter().enumerate() {
        ai.view_mut((k, 0), (1, d)).copy_from(&std.ai.row(i));
        ai[(k, d + pe + k)] = -1.0;
        bi[k] = std.bi[i];
        src.push(IneqSource::Row(k));
    }
    for k in 0..ne {
        ai[(ne + k, d + pe + k)] = -1.0;
        src.push(IneqSource::Lower(d + pe + k));
    }
    for (k, &i) in hard.iter().enumerate() {
        ai.view_mut((2 * ne + k, 0), (1, d)).copy_from(&std.ai.row(i));
        bi[2 * ne + k] = std.bi[i];
        src.push(std.ineq_src[i]);
    }
    let ext = Standard {
        ae: ae.clone(),
        be: std.be.clone(),
        eq_src: Vec::new(),
        ae_all: ae,
        be_all: std.be.clone(),
        ai,
        bi,
        ineq_src: src,
    };

    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..d {
        h[(i, i)] = PROX_WEIGHT;
    }
    for i in d..dim {
        h[(i, i)] = 1.0;
    }

    let mut center = z0;
    let mut changes = 0;
    let mut last_obj = f64::INFINITY;
    let mut last: Option<ActiveSetResult> = None;
    for _ in 0..MAX_PROX {
        let r0 = if pe > 0 { &std.ae * &center - &std.be } else { DVector::zeros(0) };
        let mut w = DVector::zeros(dim);
        w.rows_mut(0, d).copy_from(&center);
        w.rows_mut(d, pe).copy_from(&r0);
        for (k, &i) in elastic.iter().enumerate() {
            w[d + pe + k] = (std.ai.row(i).dot(&center.transpose()) - std.bi[i]).max(0.0);
        }
        let mut g = DVector::zeros(dim);
        g.rows_mut(0, d).copy_from(&(-PROX_WEIGHT * &center));
        let res = active_set(&h, &g, &ext, w, max_changes, 0.0)?;
        changes += res.changes;
        let zn = res.z.rows(0, d).clone_owned();
        let viol_obj = 0.5 * res.z.rows(d, pe + ne).norm_squared();
        let viol = std.violation(&zn);
        center = zn;
        let stalled = last_obj - viol_obj <= 1e-15 * (1.0 + viol_obj);
        last_obj = viol_obj;
        last = Some(res);
        if viol <= 1e-3 * tol {
            break;
        }
        if stalled {
            break;
        }
    }
    let res = last.expect("at least one proximal iteration");
    let feasible = std.violation(&center) <= tol;
    let certificate = if feasible {
        None
    } else {
        // y_eq = r, y_ineq = s, bound multipliers from the hard rows
        let mut cert = FarkasCertificate {
            eq: DVector::zeros(p.a_eq.nrows()),
            ineq: DVector::zeros(p.a_ineq.nrows()),
            lower: DVector::zeros(d),
            upper: DVector::zeros(d),
        };
        for (i, s) in std.eq_src.iter().enumerate() {
            let r = res.z[d + i];
            match *s {
                EqSource::Row(k) => cert.eq[k] = r,
                EqSource::Fixed(j) => {
                    if r > 0.0 {
                        cert.upper[j] += r;
                    } else {
                        cert.lower[j] -= r;
                    }
                }
            }
        }
        for (k, &i) in elastic.iter().enumerate() {
            if let IneqSource::Row(orig) = std.ineq_src[i] {
                cert.ineq[orig] = res.z[d + pe + k];
            }
        }
        for (k, &i) in hard.iter().enumerate() {
            let mu = res.ineq_mult[2 * ne + k];
            match std.ineq_src[i] {
                IneqSource::Upper(j) => cert.upper[j] += mu,
                IneqSource::Lower(j) => cert.lower[j] += mu,
                IneqSource::Row(_) => {}
            }
        }
        Some(cert)
    };
    Ok(PhaseOne { z: center, feasible, changes, certificate })
}

fn clamp_to_bounds(p: &QpProblem, z: &mut DVector<f64>) {
    for i in 0..z.len() {
        if let Some(lb) = &p.lower {
            z[i] = z[i].max(lb[i]);
        }
        if let Some(ub) = &p.upper {
            z[i] = z[i].min(ub[i]);
        }
    }
}

pub fn solve_qp_with(p: &QpProblem, opts: &QpOptions) -> Result<QpSolution, OptError> {
    p.validate()?;
    let d = p.dim();
    let tol = opts.tol;
    let std = Standard::build(p);
    let mut z = opts.initial_guess.clone().unwrap_or_else(|| DVector::zeros(d));
    if z.len() != d {
        return Err(OptError::Dimension("initial guess".into()));
    }
    clamp_to_bounds(p, &mut z);

    let empty = |status: SolveStatus, z: DVector<f64>, cert| QpSolution {
        z,
        eq_multipliers: DVector::zeros(p.a_eq.nrows()),
        ineq_multipliers: DVector::zeros(p.a_ineq.nrows()),
        lower_multipliers: DVector::zeros(d),
        upper_multipliers: DVector::zeros(d),
        status,
        regularization: 0.0,
        certificate: cert,
    };

    let mut changes = 0;
    if std.violation(&z) > 1e-3 * tol {
        match phase_one(p, &std, z.clone(), tol, opts.max_changes) {
            Ok(ph) => {
                changes += ph.changes;
                if !ph.feasible {
                    let viol = std.violation(&ph.z);
                    let status = SolveStatus::new(SolveOutcome::Infeasible, viol, changes);
                    return Ok(empty(status, ph.z, ph.certificate));
                }
                z = ph.z;
            }
            Err(ActiveSetFailure::MaxIter(zf, c)) => {
                return Ok(empty(SolveStatus::new(SolveOutcome::MaxIter, f64::INFINITY, c), zf.rows(0, d).clone_owned(), None));
            }
            Err(ActiveSetFailure::Numerical(zf, c)) => {
                return Ok(empty(
                    SolveStatus::new(SolveOutcome::NumericalFailure, f64::INFINITY, c),
                    zf.rows(0, d).clone_owned(),
                    None,
                ));
            }
        }
    }

    let res = match active_set(&p.hessian, &p.gradient, &std, z, opts.max_changes, 0.0) {
        Ok(r) => r,
        Err(ActiveSetFailure::MaxIter(zf, c)) => {
            return Ok(empty(SolveStatus::new(SolveOutcome::MaxIter, f64::INFINITY, changes + c), zf, None));
        }
        Err(ActiveSetFailure::Numerical(zf, c)) => {
            return Ok(empty(SolveStatus::new(SolveOutcome::NumericalFailure, f64::INFINITY, changes + c), zf, None));
        }
    };
    changes += res.changes;

    // map multipliers back to the caller's rows
    let mut sol = empty(SolveStatus::new(SolveOutcome::Optimal, 0.0, changes), res.z.clone(), None);
    sol.regularization = res.reg;
    for (i, s) in std.eq_src.iter().enumerate() {
        let nu = res.eq_mult[i];
        match *s {
            EqSource::Row(k) => sol.eq_multipliers[k] = nu,
            EqSource::Fixed(j) => {
                if nu > 0.0 {
                    sol.upper_multipliers[j] = nu;
                } else {
                    sol.lower_multipliers[j] = -nu;
                }
            }
        }
    }
    for (i, s) in std.ineq_src.iter().enumerate() {
        let mu = res.ineq_mult[i];
        match *s {
            IneqSource::Row(k) => sol.ineq_multipliers[k] = mu,
            IneqSource::Upper(j) => sol.upper_multipliers[j] += mu,
            IneqSource::Lower(j) => sol.lower_multipliers[j] += mu,
        }
    }
    let kkt = kkt_residual(p, &sol, res.reg);
    sol.status.kkt_residual = kkt;
    if !(kkt <= tol) {
        sol.status.outcome = SolveOutcome::NumericalFailure;
    }
    Ok(sol)
}

/// Scaled KKT residual of `sol` for the (possibly shifted) problem.
fn kkt_residual(p: &QpProblem, sol: &QpSolution, reg: f64) -> f64 {
    let z = &sol.z;
    let mut hz = &p.hessian * z;
    if reg > 0.0 {
        hz += reg * z;
    }
    let mut stat = hz + &p.gradient;
    if p.a_eq.nrows() > 0 {
        stat += p.a_eq.transpose() * &sol.eq_multipliers;
    }
    if p.a_ineq.nrows() > 0 {
        stat += p.a_ineq.transpose() * &sol.ineq_multipliers;
    }
    stat += &sol.upper_multipliers - &sol.lower_multipliers;
    let scale = objective_scale(&p.hessian, &p.gradient, z);
    let mut res = inf_norm(&stat) / scale;
    res = res.max(p.max_violation(z));
    let mut dual: f64 = 0.0;
    let mut compl: f64 = 0.0;
    if p.a_ineq.nrows() > 0 {
        let slack = &p.b_ineq - &p.a_ineq * z;
        for i in 0..slack.len() {
            dual = dual.max(-sol.ineq_multipliers[i]);
            if sol.ineq_multipliers[i] != 0.0 {
                compl = compl.max((sol.ineq_multipliers[i] * slack[i]).abs());
            }
        }
    }
    for j in 0..z.len() {
        dual = dual.max(-sol.lower_multipliers[j]).max(-sol.upper_multipliers[j]);
        if sol.upper_multipliers[j] != 0.0 {
            if let Some(ub) = &p.upper {
                compl = compl.max((sol.upper_multipliers[j] * (ub[j] - z[j])).abs());
            }
        }
        if sol.lower_multipliers[j] != 0.0 {
            if let Some(lb) = &p.lower {
                compl = compl.max((sol.lower_multipliers[j] * (z[j] - lb[j])).abs());
            }
        }
    }
    res.max(dual).max(compl / scale)
}
