//! Finite-horizon optimal control problems as [`NlpProblem`]s.
//!
//! Every cost and constraint used by the toolkit is a quadratic in the
//! stacked trajectory `X = (x_0, ..., x_H)`, `U = (u_0, ..., u_{H-1})` without
//! state-input cross terms, which keeps the derivatives exact and cheap. Two
//! decision layouts are supported:
//!
//! * condensed: `z = U`, states eliminated through `X = Phi x_0 + Gamma U`
//!   (linear models only);
//! * shooting: `z = (U, x_1, ..., x_H)` with the dynamics as equalities.

use nalgebra::{DMatrix, DVector};

use crate::config::Ps2fConfig;
use crate::model::SystemModel;
use crate::opt::{negative_curvature, solve_nlp, NlpProblem, NlpSolution, OptError, SqpOptions};
use crate::sets::BoxSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Condensed,
    Shooting,
}

impl Layout {
    pub fn for_model(model: &SystemModel) -> Self {
        if model.is_linear() {
            Layout::Condensed
        } else {
            Layout::Shooting
        }
    }
}

/// `1/2 X'Hxx X + 1/2 U'Huu U + gx'X + gu'U + c` with block-diagonal Hessians.
#[derive(Debug, Clone)]
pub struct TrajQuad {
    pub hxx: DMatrix<f64>,
    pub huu: DMatrix<f64>,
    pub gx: DVector<f64>,
    pub gu: DVector<f64>,
    pub c: f64,
}

impl TrajQuad {
    pub fn zero(n: usize, m: usize, h: usize) -> Self {
        Self {
            hxx: DMatrix::zeros((h + 1) * n, (h + 1) * n),
            huu: DMatrix::zeros(h * m, h * m),
            gx: DVector::zeros((h + 1) * n),
            gu: DVector::zeros(h * m),
            c: 0.0,
        }
    }

    fn add_state_block(&mut self, i: usize, w: &DMatrix<f64>) {
        let n = w.nrows();
        let mut blk = self.hxx.view_mut((i * n, i * n), (n, n));
        blk += w * 2.0;
    }

    fn add_input_block(&mut self, i: usize, w: &DMatrix<f64>) {
        let m = w.nrows();
        let mut blk = self.huu.view_mut((i * m, i * m), (m, m));
        blk += w * 2.0;
    }

    /// `sum_{i<H} l(x_i, u_i)`.
    pub fn stage_sum(q: &DMatrix<f64>, r: &DMatrix<f64>, h: usize) -> Self {
        let mut out = Self::zero(q.nrows(), r.nrows(), h);
        for i in 0..h {
            out.add_state_block(i, q);
            out.add_input_block(i, r);
        }
        out
    }

    /// `sum_{i<H} l(x_i, u_i) + x_H' P_f x_H`.
    pub fn regulation(q: &DMatrix<f64>, r: &DMatrix<f64>, p_f: &DMatrix<f64>, h: usize) -> Self {
        let mut out = Self::stage_sum(q, r, h);
        out.add_state_block(h, p_f);
        out
    }

    /// `|u_0 - u_ext|^2`.
    pub fn distortion(u_ext: &DVector<f64>, n: usize, h: usize) -> Self {
        let m = u_ext.len();
        let mut out = Self::zero(n, m, h);
        out.add_input_block(0, &DMatrix::identity(m, m));
        out.gu.rows_mut(0, m).copy_from(&(-2.0 * u_ext));
        out.c = u_ext.norm_squared();
        out
    }

    /// `sum_{i<H} discount^i |pos(x_i) - target|^2`, `pos` the leading coordinates.
    pub fn discounted_goal(target: &DVector<f64>, discount: f64, n: usize, m: usize, h: usize) -> Self {
        let d = target.len();
        let mut out = Self::zero(n, m, h);
        let mut w = 1.0;
        for i in 0..h {
            let mut sel = DMatrix::zeros(n, n);
            for j in 0..d {
                sel[(j, j)] = w;
            }
            out.add_state_block(i, &sel);
            for j in 0..d {
                out.gx[i * n + j] -= 2.0 * w * target[j];
            }
            out.c += w * target.norm_squared();
            w *= discount;
        }
        out
    }

    /// `x_H' P x_H - gamma`.
    pub fn terminal_ellipsoid(p: &DMatrix<f64>, gamma: f64, m: usize, h: usize) -> Self {
        let n = p.nrows();
        let mut out = Self::zero(n, m, h);
        out.add_state_block(h, p);
        out.c = -gamma;
        out
    }

    /// `sum_{i<H} l(x_i, u_i) - budget - a l(x_0, u_0)`.
    pub fn performance(q: &DMatrix<f64>, r: &DMatrix<f64>, h: usize, budget: f64, a: f64) -> Self {
        let mut out = Self::stage_sum(q, r, h);
        out.add_state_block(0, &(q * -a));
        out.add_input_block(0, &(r * -a));
        out.c = -budget;
        out
    }

    pub fn value(&self, xs: &DVector<f64>, us: &DVector<f64>) -> f64 {
        0.5 * xs.dot(&(&self.hxx * xs)) + 0.5 * us.dot(&(&self.huu * us)) + self.gx.dot(xs) + self.gu.dot(us) + self.c
    }
}

#[derive(Debug, Clone)]
pub enum Terminal {
    Free,
    Ellipsoid { p: DMatrix<f64>, gamma: f64 },
    Fixed(DVector<f64>),
}

#[derive(Debug, Clone)]
pub struct OcpSpec {
    pub horizon: usize,
    pub objective: TrajQuad,
    pub terminal: Terminal,
    /// Steps `i` whose state is kept in the state box.
    pub state_box_steps: Vec<usize>,
    pub state_box: Option<BoxSet>,
    pub input_box: Option<BoxSet>,
    pub performance: Option<TrajQuad>,
    pub fixed_first_input: Option<DVector<f64>>,
}

struct Condensed {
    s0: DVector<f64>,
    gamma: DMatrix<f64>,
    hess: DMatrix<f64>,
    quads_hess: Vec<DMatrix<f64>>,
    lin_rows: DMatrix<f64>,
    lin_rhs: DVector<f64>,
    term_rows: Option<(DMatrix<f64>, DVector<f64>)>,
}

/// An OCP bound to an initial state.
pub struct OcpProblem<'a> {
    model: &'a SystemModel,
    x0: DVector<f64>,
    spec: OcpSpec,
    layout: Layout,
    n: usize,
    m: usize,
    lower: DVector<f64>,
    upper: DVector<f64>,
    quads: Vec<TrajQuad>,
    condensed: Option<Condensed>,
}

impl<'a> OcpProblem<'a> {
    pub fn new(model: &'a SystemModel, x0: DVector<f64>, spec: OcpSpec, layout: Layout) -> Self {
        let n = model.state_dim();
        let m = model.input_dim();
        let h = spec.horizon;
        let layout = if model.is_linear() { layout } else { Layout::Shooting };
        let nu = h * m;
        let dim = match layout {
            Layout::Condensed => nu,
            Layout::Shooting => nu + h * n,
        };
        let mut lower = DVector::from_element(dim, f64::NEG_INFINITY);
        let mut upper = DVector::from_element(dim, f64::INFINITY);
        if let Some(ub) = &spec.input_box {
            for i in 0..h {
                lower.rows_mut(i * m, m).copy_from(&ub.lower);
                upper.rows_mut(i * m, m).copy_from(&ub.upper);
            }
        }
        if let Some(u0) = &spec.fixed_first_input {
            lower.rows_mut(0, m).copy_from(u0);
            upper.rows_mut(0, m).copy_from(u0);
        }
        let mut quads = Vec::new();
        if let Terminal::Ellipsoid { p, gamma } = &spec.terminal {
            quads.push(TrajQuad::terminal_ellipsoid(p, *gamma, m, h));
        }
        if let Some(perf) = &spec.performance {
            quads.push(perf.clone());
        }
        let mut condensed = None;
        match layout {
            Layout::Shooting => {
                if let Some(xb) = &spec.state_box {
                    for &i in spec.state_box_steps.iter().filter(|&&i| i >= 1 && i <= h) {
                        let off = nu + (i - 1) * n;
                        lower.rows_mut(off, n).copy_from(&xb.lower);
                        upper.rows_mut(off, n).copy_from(&xb.upper);
                    }
                }
                if let Terminal::Fixed(t) = &spec.terminal {
                    let off = nu + (h - 1) * n;
                    lower.rows_mut(off, n).copy_from(t);
                    upper.rows_mut(off, n).copy_from(t);
                }
            }
            Layout::Condensed => {
                let (a, b) = model.matrices().expect("condensed layout needs a linear model");
                condensed = Some(Self::condense(a, b, &x0, &spec, &quads, n, m));
            }
        }
        Self { model, x0, spec, layout, n, m, lower, upper, quads, condensed }
    }

    fn condense(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        x0: &DVector<f64>,
        spec: &OcpSpec,
        quads: &[TrajQuad],
        n: usize,
        m: usize,
    ) -> Condensed {
        let h = spec.horizon;
        let mut s0 = DVector::zeros((h + 1) * n);
        let mut gamma = DMatrix::zeros((h + 1) * n, h * m);
        let mut xi = x0.clone();
        s0.rows_mut(0, n).copy_from(&xi);
        for i in 1..=h {
            xi = a * xi;
            s0.rows_mut(i * n, n).copy_from(&xi);
            // row block i = A * row block (i-1) + B in column block i-1
            let prev = gamma.view(((i - 1) * n, 0), (n, h * m)).clone_owned();
            let next = a * prev;
            gamma.view_mut((i * n, 0), (n, h * m)).copy_from(&next);
            let mut blk = gamma.view_mut((i * n, (i - 1) * m), (n, m));
            blk += b;
        }
        let lift = |q: &TrajQuad| gamma.transpose() * &q.hxx * &gamma + &q.huu;
        let hess = lift(&spec.objective);
        let quads_hess = quads.iter().map(lift).collect();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        if let Some(xb) = &spec.state_box {
            for &i in spec.state_box_steps.iter().filter(|&&i| i >= 1 && i <= h) {
                for j in 0..n {
                    let r = i * n + j;
                    let g = gamma.row(r).clone_owned();
                    rows.push(g.clone());
                    rhs.push(xb.upper[j] - s0[r]);
                    rows.push(-g);
                    rhs.push(s0[r] - xb.lower[j]);
                }
            }
        }
        let mut lin_rows = DMatrix::zeros(rows.len(), h * m);
        for (k, r) in rows.iter().enumerate() {
            lin_rows.set_row(k, r);
        }
        let term_rows = match &spec.terminal {
            Terminal::Fixed(t) => {
                let g = gamma.view((h * n, 0), (n, h * m)).clone_owned();
                let r = t - s0.rows(h * n, n);
                Some((g, r))
            }
            _ => None,
        };
        Condensed { s0, gamma, hess, quads_hess, lin_rows, lin_rhs: DVector::from_vec(rhs), term_rows }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn nu(&self) -> usize {
        self.spec.horizon * self.m
    }

    /// `(X, U)` stacks for a decision vector (exact rollout in the condensed layout).
    pub fn trajectory(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let nu = self.nu();
        let us = z.rows(0, nu).clone_owned();
        let xs = match &self.condensed {
            Some(c) => &c.s0 + &c.gamma * &us,
            None => {
                let mut xs = DVector::zeros((self.spec.horizon + 1) * self.n);
                xs.rows_mut(0, self.n).copy_from(&self.x0);
                xs.rows_mut(self.n, self.spec.horizon * self.n).copy_from(&z.rows(nu, self.spec.horizon * self.n));
                xs
            }
        };
        (xs, us)
    }

    /// Decision vector from input and state sequences (`xs` includes `x_0`).
    pub fn pack(&self, us: &[DVector<f64>], xs: &[DVector<f64>]) -> DVector<f64> {
        let (n, m, h) = (self.n, self.m, self.spec.horizon);
        let mut z = DVector::zeros(self.dim());
        for i in 0..h {
            z.rows_mut(i * m, m).copy_from(&us[i]);
        }
        if self.layout == Layout::Shooting {
            for i in 1..=h {
                z.rows_mut(h * m + (i - 1) * n, n).copy_from(&xs[i]);
            }
        }
        z
    }

    /// Input sequence and a state sequence re-simulated through the model.
    pub fn unpack(&self, z: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let m = self.m;
        let us: Vec<DVector<f64>> = (0..self.spec.horizon).map(|i| z.rows(i * m, m).clone_owned()).collect();
        let xs = self.model.rollout(&self.x0, &us);
        (us, xs)
    }

    fn quad_grad(&self, q: &TrajQuad, z: &DVector<f64>) -> DVector<f64> {
        let (xs, us) = self.trajectory(z);
        let gx = &q.hxx * &xs + &q.gx;
        let gu = &q.huu * &us + &q.gu;
        match &self.condensed {
            Some(c) => c.gamma.transpose() * gx + gu,
            None => {
                let nu = self.nu();
                let mut g = DVector::zeros(self.dim());
                g.rows_mut(0, nu).copy_from(&gu);
                let nx = self.spec.horizon * self.n;
                g.rows_mut(nu, nx).copy_from(&gx.rows(self.n, nx));
                g
            }
        }
    }

    fn quad_hess_shooting(&self, q: &TrajQuad) -> DMatrix<f64> {
        let nu = self.nu();
        let nx = self.spec.horizon * self.n;
        let mut h = DMatrix::zeros(nu + nx, nu + nx);
        h.view_mut((0, 0), (nu, nu)).copy_from(&q.huu);
        h.view_mut((nu, nu), (nx, nx)).copy_from(&q.hxx.view((self.n, self.n), (nx, nx)));
        h
    }

    pub fn objective_value(&self, z: &DVector<f64>) -> f64 {
        let (xs, us) = self.trajectory(z);
        self.spec.objective.value(&xs, &us)
    }

    pub fn solve(&self, z0: &DVector<f64>, opts: &SqpOptions) -> Result<NlpSolution, OptError> {
        solve_nlp(self, z0, opts)
    }

    /// Like [`OcpProblem::solve`], but a solution with negative curvature
    /// on its active tangent space (a saddle point) triggers a restart: the
    /// inputs are perturbed along that direction, both signs and a few step
    /// lengths are re-simulated, and the SQP is rerun from the start with the
    /// lowest objective if it beats the current one.
    pub fn solve_second_order(&self, z0: &DVector<f64>, opts: &SqpOptions, max_restarts: usize) -> Result<NlpSolution, OptError> {
        let mut sol = solve_nlp(self, z0, opts)?;
        for _ in 0..max_restarts {
            if !sol.is_optimal() {
                break;
            }
            let Some(dir) = negative_curvature(self, &sol) else { break };
            let (us, _) = self.unpack(&sol.z);
            let mut best: Option<(f64, DVector<f64>)> = None;
            for alpha in [1.0, 0.3, 0.1] {
                for sign in [1.0, -1.0] {
                    let mut start: Vec<DVector<f64>> = us.clone();
                    for (i, u) in start.iter_mut().enumerate() {
                        *u += dir.rows(i * self.m, self.m) * (sign * alpha);
                        if let Some(b) = &self.spec.input_box {
                            *u = b.clamp(u);
                        }
                    }
                    if let Some(u0) = &self.spec.fixed_first_input {
                        start[0] = u0.clone();
                    }
                    let z = self.pack(&start, &self.model.rollout(&self.x0, &start));
                    let f = self.objective(&z);
                    if f.is_finite() && best.as_ref().map_or(true, |(bf, _)| f < *bf) {
                        best = Some((f, z));
                    }
                }
            }
            let Some((f, z)) = best else { break };
            if f >= sol.objective {
                break;
            }
            let cand = solve_nlp(self, &z, opts)?;
            if !(cand.is_optimal() && cand.objective < sol.objective - 1e-10 * (1.0 + sol.objective.abs())) {
                break;
            }
            sol = cand;
        }
        Ok(sol)
    }
}

impl NlpProblem for OcpProblem<'_> {
    fn dim(&self) -> usize {
        match self.layout {
            Layout::Condensed => self.nu(),
            Layout::Shooting => self.nu() + self.spec.horizon * self.n,
        }
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        self.objective_value(z)
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        self.quad_grad(&self.spec.objective, z)
    }

    fn eq_dim(&self) -> usize {
        match &self.condensed {
            Some(c) => c.term_rows.as_ref().map_or(0, |t| t.0.nrows()),
            None => self.spec.horizon * self.n,
        }
    }

    fn eq_residuals(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.condensed {
            Some(c) => match &c.term_rows {
                Some((g, r)) => g * z - r,
                None => DVector::zeros(0),
            },
            None => {
                let (n, m, h) = (self.n, self.m, self.spec.horizon);
                let (xs, us) = self.trajectory(z);
                let mut r = DVector::zeros(h * n);
                for i in 0..h {
                    let xi = xs.rows(i * n, n).clone_owned();
                    let ui = us.rows(i * m, m).clone_owned();
                    let next = xs.rows((i + 1) * n, n) - self.model.step(&xi, &ui);
                    r.rows_mut(i * n, n).copy_from(&next);
                }
                r
            }
        }
    }

    fn eq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        match &self.condensed {
            Some(c) => match &c.term_rows {
                Some((g, _)) => g.clone(),
                None => DMatrix::zeros(0, self.dim()),
            },
            None => {
                let (n, m, h) = (self.n, self.m, self.spec.horizon);
                let nu = self.nu();
                let (xs, us) = self.trajectory(z);
                let mut j = DMatrix::zeros(h * n, self.dim());
                for i in 0..h {
                    let xi = xs.rows(i * n, n).clone_owned();
                    let ui = us.rows(i * m, m).clone_owned();
                    let (fx, fu) = self.model.jacobians(&xi, &ui);
                    j.view_mut((i * n, nu + i * n), (n, n)).fill_with_identity();
                    if i >= 1 {
                        j.view_mut((i * n, nu + (i - 1) * n), (n, n)).copy_from(&(-fx));
                    }
                    j.view_mut((i * n, i * m), (n, m)).copy_from(&(-fu));
                }
                j
            }
        }
    }

    fn ineq_dim(&self) -> usize {
        self.condensed.as_ref().map_or(0, |c| c.lin_rows.nrows()) + self.quads.len()
    }

    fn ineq_residuals(&self, z: &DVector<f64>) -> DVector<f64> {
        let (xs, us) = self.trajectory(z);
        let mut out = Vec::with_capacity(self.ineq_dim());
        if let Some(c) = &self.condensed {
            out.extend((&c.lin_rows * z - &c.lin_rhs).iter().copied());
        }
        out.extend(self.quads.iter().map(|q| q.value(&xs, &us)));
        DVector::from_vec(out)
    }

    fn ineq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let lin = self.condensed.as_ref().map_or(0, |c| c.lin_rows.nrows());
        let mut j = DMatrix::zeros(self.ineq_dim(), self.dim());
        if let Some(c) = &self.condensed {
            j.view_mut((0, 0), (lin, self.dim())).copy_from(&c.lin_rows);
        }
        for (k, q) in self.quads.iter().enumerate() {
            j.set_row(lin + k, &self.quad_grad(q, z).transpose());
        }
        j
    }

    fn bounds(&self) -> (Option<DVector<f64>>, Option<DVector<f64>>) {
        (Some(self.lower.clone()), Some(self.upper.clone()))
    }

    fn constraints_affine(&self) -> bool {
        self.condensed.is_some() && self.quads.is_empty()
    }

    fn lagrangian_hessian(&self, z: &DVector<f64>, lambda: &DVector<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
        let lin = self.condensed.as_ref().map_or(0, |c| c.lin_rows.nrows());
        match &self.condensed {
            Some(c) => {
                let mut h = c.hess.clone();
                for (k, qh) in c.quads_hess.iter().enumerate() {
                    let w = mu.get(lin + k).copied().unwrap_or(0.0);
                    if w != 0.0 {
                        h += qh * w;
                    }
                }
                h
            }
            None => {
                let (n, m, hz) = (self.n, self.m, self.spec.horizon);
                let nu = self.nu();
                let mut h = self.quad_hess_shooting(&self.spec.objective);
                for (k, q) in self.quads.iter().enumerate() {
                    let w = mu.get(lin + k).copied().unwrap_or(0.0);
                    if w != 0.0 {
                        h += self.quad_hess_shooting(q) * w;
                    }
                }
                if lambda.len() == hz * n && lambda.iter().any(|v| *v != 0.0) {
                    let (xs, us) = self.trajectory(z);
                    for i in 0..hz {
                        let w = lambda.rows(i * n, n).clone_owned();
                        if w.iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        let xi = xs.rows(i * n, n).clone_owned();
                        let ui = us.rows(i * m, m).clone_owned();
                        // residual is x_{i+1} - f(x_i, u_i)
                        let c2 = -self.model.hessian_contraction(&xi, &ui, &w);
                        let uo = i * m;
                        let mut blk = h.view_mut((uo, uo), (m, m));
                        blk += c2.view((n, n), (m, m));
                        if i >= 1 {
                            let xo = nu + (i - 1) * n;
                            let mut bxx = h.view_mut((xo, xo), (n, n));
                            bxx += c2.view((0, 0), (n, n));
                            let mut bxu = h.view_mut((xo, uo), (n, m));
                            bxu += c2.view((0, n), (n, m));
                            let mut bux = h.view_mut((uo, xo), (m, n));
                            bux += c2.view((n, 0), (m, n));
                        }
                    }
                }
                h
            }
        }
    }
}

/// Stage cost budget `sum_{i<M} l(z_i, v_i)` of a reference trajectory.
pub fn reference_budget(cfg: &Ps2fConfig, zs: &[DVector<f64>], vs: &[DVector<f64>], m: usize) -> f64 {
    (0..m).map(|i| cfg.cost.stage(&zs[i], &vs[i])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::fd;

    fn spec(h: usize, terminal: Terminal) -> OcpSpec {
        let q = DMatrix::identity(3, 3) * 10.0;
        let r = DMatrix::identity(2, 2);
        OcpSpec {
            horizon: h,
            objective: TrajQuad::stage_sum(&q, &r, h),
            terminal,
            state_box_steps: (1..=h).collect(),
            state_box: Some(BoxSet::symmetric(3, 0.5)),
            input_box: Some(BoxSet::symmetric(2, 10.0)),
            performance: Some(TrajQuad::performance(&q, &r, h, 3.0, 0.5)),
            fixed_first_input: None,
        }
    }

    #[test]
    fn shooting_derivatives_match_differences() {
        let model = SystemModel::unicycle(0.2);
        let x0 = DVector::from_vec(vec![0.1, -0.1, 0.3]);
        let ocp = OcpProblem::new(&model, x0, spec(3, Terminal::Ellipsoid { p: DMatrix::identity(3, 3), gamma: 0.1 }), Layout::Shooting);
        let z = DVector::from_fn(ocp.dim(), |i, _| 0.1 * ((i as f64) * 0.7).sin());
        let g = ocp.gradient(&z);
        let g_fd = fd::gradient(|w| ocp.objective(w), &z);
        assert!((g - g_fd).amax() < 1e-6);
        let je = ocp.eq_jacobian(&z);
        let je_fd = fd::jacobian(|w| ocp.eq_residuals(w), &z, ocp.eq_dim());
        assert!((je - je_fd).amax() < 1e-6);
        let ji = ocp.ineq_jacobian(&z);
        let ji_fd = fd::jacobian(|w| ocp.ineq_residuals(w), &z, ocp.ineq_dim());
        assert!((ji - ji_fd).amax() < 1e-6);
        let lam = DVector::from_fn(ocp.eq_dim(), |i, _| (i as f64 * 1.3).cos());
        let mu = DVector::from_vec(vec![0.7, 0.2]);
        let h = ocp.lagrangian_hessian(&z, &lam, &mu);
        let h_fd = fd::hessian_from_gradient(
            |w| ocp.gradient(w) + ocp.eq_jacobian(w).transpose() * &lam + ocp.ineq_jacobian(w).transpose() * &mu,
            &z,
        );
        assert!((h - h_fd).amax() < 1e-5);
    }

    #[test]
    fn condensed_matches_shooting_values() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let model = SystemModel::linear(a, DMatrix::identity(2, 2));
        let q = DMatrix::identity(2, 2) * 10.0;
        let r = DMatrix::identity(2, 2);
        let s = OcpSpec {
            horizon: 3,
            objective: TrajQuad::regulation(&q, &r, &q, 3),
            terminal: Terminal::Ellipsoid { p: q.clone(), gamma: 7.0 },
            state_box_steps: vec![1, 2, 3],
            state_box: Some(BoxSet::symmetric(2, 2.0)),
            input_box: Some(BoxSet::symmetric(2, 1.0)),
            performance: None,
            fixed_first_input: None,
        };
        let x0 = DVector::from_vec(vec![1.0, -0.5]);
        let c = OcpProblem::new(&model, x0.clone(), s.clone(), Layout::Condensed);
        let sh = OcpProblem::new(&model, x0, s, Layout::Shooting);
        let us: Vec<_> = (0..3).map(|i| DVector::from_vec(vec![0.1 * i as f64, -0.2])).collect();
        let (_, xs) = c.unpack(&c.pack(&us, &[]));
        let zc = c.pack(&us, &xs);
        let zs = sh.pack(&us, &xs);
        assert!((c.objective(&zc) - sh.objective(&zs)).abs() < 1e-12);
        assert!(sh.eq_residuals(&zs).amax() < 1e-12);
        let g = c.gradient(&zc);
        let g_fd = fd::gradient(|w| c.objective(w), &zc);
        assert!((g - g_fd).amax() < 1e-6);
        let ji = c.ineq_jacobian(&zc);
        let ji_fd = fd::jacobian(|w| c.ineq_residuals(w), &zc, c.ineq_dim());
        assert!((ji - ji_fd).amax() < 1e-6);
    }
}
