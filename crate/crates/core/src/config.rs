//! Filter configuration, JSON loading and standing-assumption checks.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::QuadraticCost;
use crate::linear::{max_ellipsoid_level, solve_dare, LinearError};
use crate::model::{ModelKind, SystemModel};
use crate::opt::linalg::{min_eigenvalue, singular_values};
use crate::sets::{BoxSet, SetError, TerminalSet};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Linear(#[from] LinearError),
}

#[derive(Debug, Clone)]
pub struct Ps2fConfig {
    pub model: SystemModel,
    /// Nominal horizon `N`.
    pub n: usize,
    /// Filter horizon `M`.
    pub m: usize,
    pub a: f64,
    pub cost: QuadraticCost,
    pub x_set: BoxSet,
    pub u_set: BoxSet,
    pub xf: TerminalSet,
    /// Terminal controller `u = -K x`, when one is known.
    pub terminal_gain: Option<DMatrix<f64>>,
}

impl Ps2fConfig {
    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    pub fn with_a(&self, a: f64) -> Self {
        Self { a, ..self.clone() }
    }

    pub fn with_m(&self, m: usize) -> Self {
        Self { m, ..self.clone() }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let spec: ConfigSpec = serde_json::from_str(text)?;
        spec.resolve()
    }

    pub fn to_spec(&self) -> Result<ConfigSpec, ConfigError> {
        ConfigSpec::from_config(self)
    }
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub state_dim: usize,
    pub input_dim: usize,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Rows>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Rows>,
    #[serde(rename = "Ts", default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
    /// Defaults to the Riccati solution for linear models and zero otherwise.
    #[serde(rename = "P_f", default, skip_serializing_if = "Option::is_none")]
    pub p_f: Option<Rows>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    Ellipsoid,
    Origin,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TerminalSpec {
    pub kind: TerminalKind,
    /// Defaults to `P_f`.
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Rows>,
    /// Defaults to the largest admissible level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

/// JSON form of [`Ps2fConfig`]; matrices are row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub model: ModelSpec,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub a: f64,
    pub cost: CostSpec,
    #[serde(rename = "X")]
    pub x: BoxSpec,
    #[serde(rename = "U")]
    pub u: BoxSpec,
    #[serde(rename = "Xf")]
    pub xf: TerminalSpec,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Rows>,
}

pub fn matrix_from_rows(rows: &Rows, name: &str) -> Result<DMatrix<f64>, ConfigError> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(ConfigError::Invalid(format!("{name} is not rectangular")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ConfigError::Invalid(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn expect_shape(m: &DMatrix<f64>, shape: (usize, usize), name: &str) -> Result<(), ConfigError> {
    if m.shape() != shape {
        return Err(ConfigError::Invalid(format!("{name} must be {}x{}, got {}x{}", shape.0, shape.1, m.nrows(), m.ncols())));
    }
    Ok(())
}

impl ConfigSpec {
    pub fn resolve(&self) -> Result<Ps2fConfig, ConfigError> {
        let (n, m) = (self.model.state_dim, self.model.input_dim);
        if n == 0 || m == 0 {
            return Err(ConfigError::Invalid("state_dim and input_dim must be positive".into()));
        }
        let model = match self.model.kind {
            ModelKind::Linear => {
                let a = matrix_from_rows(self.model.a.as_ref().ok_or_else(|| ConfigError::Invalid("linear model needs A".into()))?, "A")?;
                let b = matrix_from_rows(self.model.b.as_ref().ok_or_else(|| ConfigError::Invalid("linear model needs B".into()))?, "B")?;
                expect_shape(&a, (n, n), "A")?;
                expect_shape(&b, (n, m), "B")?;
                SystemModel::linear(a, b)
            }
            ModelKind::Unicycle => {
                if n != 3 || m != 2 {
                    return Err(ConfigError::Invalid("unicycle has state_dim 3 and input_dim 2".into()));
                }
                let ts = self.model.ts.ok_or_else(|| ConfigError::Invalid("unicycle model needs Ts".into()))?;
                if !(ts > 0.0) {
                    return Err(ConfigError::Invalid("Ts must be positive".into()));
                }
                SystemModel::unicycle(ts)
            }
            ModelKind::Custom => return Err(ConfigError::Invalid("custom models cannot be loaded from JSON".into())),
        };
        let q = matrix_from_rows(&self.cost.q, "Q")?;
        let r = matrix_from_rows(&self.cost.r, "R")?;
        expect_shape(&q, (n, n), "Q")?;
        expect_shape(&r, (m, m), "R")?;
        let x_set = BoxSet::new(DVector::from_vec(self.x.lower.clone()), DVector::from_vec(self.x.upper.clone()))?;
        let u_set = BoxSet::new(DVector::from_vec(self.u.lower.clone()), DVector::from_vec(self.u.upper.clone()))?;
        if x_set.dim() != n || u_set.dim() != m {
            return Err(ConfigError::Invalid("X and U must match the model dimensions".into()));
        }

        let mut k = self.k.as_ref().map(|k| matrix_from_rows(k, "K")).transpose()?;
        if let Some(k) = &k {
            expect_shape(k, (m, n), "K")?;
        }
        let p_f = match &self.cost.p_f {
            Some(p) => {
                let p = matrix_from_rows(p, "P_f")?;
                expect_shape(&p, (n, n), "P_f")?;
                p
            }
            None => match model.matrices() {
                Some((a, b)) => {
                    let ric = solve_dare(a, b, &q, &r)?;
                    if k.is_none() {
                        k = Some(ric.k.clone());
                    }
                    ric.p
                }
                None => DMatrix::zeros(n, n),
            },
        };
        if k.is_none() && self.xf.kind == TerminalKind::Ellipsoid {
            if let Some((a, b)) = model.matrices() {
                k = Some(solve_dare(a, b, &q, &r)?.k);
            }
        }
        let xf = match self.xf.kind {
            TerminalKind::Origin => TerminalSet::Origin,
            TerminalKind::None => TerminalSet::None,
            TerminalKind::Ellipsoid => {
                let p = match &self.xf.p {
                    Some(p) => {
                        let p = matrix_from_rows(p, "Xf.P")?;
                        expect_shape(&p, (n, n), "Xf.P")?;
                        p
                    }
                    None => p_f.clone(),
                };
                let gamma = match self.xf.gamma {
                    Some(g) => g,
                    None => max_ellipsoid_level(&p, k.as_ref(), &x_set, Some(&u_set))?,
                };
                TerminalSet::Ellipsoid { p, gamma }
            }
        };
        Ok(Ps2fConfig {
            model,
            n: self.n,
            m: self.m,
            a: self.a,
            cost: QuadraticCost::new(q, r, p_f),
            x_set,
            u_set,
            xf,
            terminal_gain: k,
        })
    }

    /// Fully explicit spec (all derived quantities written out).
    pub fn from_config(cfg: &Ps2fConfig) -> Result<Self, ConfigError> {
        let (a, b, ts) = match &cfg.model {
            SystemModel::Linear { a, b } => (Some(matrix_to_rows(a)), Some(matrix_to_rows(b)), None),
            SystemModel::Unicycle { ts } => (None, None, Some(*ts)),
            SystemModel::Custom(_) => return Err(ConfigError::Invalid("custom models cannot be serialized".into())),
        };
        let xf = match &cfg.xf {
            TerminalSet::Ellipsoid { p, gamma } => {
                TerminalSpec { kind: TerminalKind::Ellipsoid, p: Some(matrix_to_rows(p)), gamma: Some(*gamma) }
            }
            TerminalSet::Origin => TerminalSpec { kind: TerminalKind::Origin, p: None, gamma: None },
            TerminalSet::None => TerminalSpec { kind: TerminalKind::None, p: None, gamma: None },
        };
        Ok(Self {
            model: ModelSpec { kind: cfg.model.kind(), state_dim: cfg.state_dim(), input_dim: cfg.input_dim(), a, b, ts },
            n: cfg.n,
            m: cfg.m,
            a: cfg.a,
            cost: CostSpec {
                q: matrix_to_rows(&cfg.cost.q),
                r: matrix_to_rows(&cfg.cost.r),
                p_f: Some(matrix_to_rows(&cfg.cost.p_f)),
            },
            x: BoxSpec { lower: cfg.x_set.lower.iter().copied().collect(), upper: cfg.x_set.upper.iter().copied().collect() },
            u: BoxSpec { lower: cfg.u_set.lower.iter().copied().collect(), upper: cfg.u_set.upper.iter().copied().collect() },
            xf,
            k: cfg.terminal_gain.as_ref().map(matrix_to_rows),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    Dimension { detail: String },
    RNotPositiveDefinite { min_eigenvalue: f64 },
    QNotPositiveSemidefinite { min_eigenvalue: f64 },
    TerminalWeightNotPositiveSemidefinite { min_eigenvalue: f64 },
    OriginNotInterior { set: String },
    HorizonOrder { m: usize, n: usize },
    NegativeWeight { a: f64 },
    Uncontrollable { rank: usize, n: usize },
    TerminalSetMalformed,
    TerminalNotInvariant { worst_slack: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

const INVARIANCE_SAMPLES: usize = 1000;
const INVARIANCE_TOL: f64 = 1e-8;

/// Deterministic unit directions in `R^n`.
pub fn sphere_directions(n: usize, count: usize) -> Vec<DVector<f64>> {
    match n {
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / count as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            // Fibonacci lattice
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let y = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let rad = (1.0 - y * y).sqrt();
                    let t = golden * i as f64;
                    DVector::from_vec(vec![rad * t.cos(), y, rad * t.sin()])
                })
                .collect()
        }
        _ => (0..count)
            .map(|i| {
                let v = DVector::from_fn(n, |j, _| ((i as f64 + 1.0) * (j as f64 + 1.0) * 0.618_033_988_75 + j as f64).sin());
                let norm = v.norm();
                v / norm
            })
            .collect(),
    }
}

fn kalman_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut c = DMatrix::zeros(n, n * m);
    let mut blk = b.clone();
    for i in 0..n {
        c.view_mut((0, i * m), (n, m)).copy_from(&blk);
        blk = a * blk;
    }
    let s = singular_values(&c);
    match s.first() {
        Some(&max) if max > 0.0 => s.iter().filter(|&&v| v > 1e-9 * max).count(),
        _ => 0,
    }
}

/// Mechanical check of the standing assumptions. Never fails; returns the
/// list of violated conditions.
pub fn validate_config(cfg: &Ps2fConfig) -> ValidationReport {
    let mut v = Vec::new();
    let n = cfg.state_dim();
    let m = cfg.input_dim();
    let dims_ok = cfg.cost.q.shape() == (n, n)
        && cfg.cost.r.shape() == (m, m)
        && cfg.cost.p_f.shape() == (n, n)
        && cfg.x_set.dim() == n
        && cfg.u_set.dim() == m
        && cfg.terminal_gain.as_ref().map_or(true, |k| k.shape() == (m, n));
    if !dims_ok {
        v.push(Violation::Dimension { detail: "cost, set or gain dimensions do not match the model".into() });
        return ValidationReport { violations: v };
    }
    let r_min = min_eigenvalue(&cfg.cost.r);
    if !(r_min > 1e-10) {
        v.push(Violation::RNotPositiveDefinite { min_eigenvalue: r_min });
    }
    let q_min = min_eigenvalue(&cfg.cost.q);
    if q_min < -1e-10 {
        v.push(Violation::QNotPositiveSemidefinite { min_eigenvalue: q_min });
    }
    let pf_min = min_eigenvalue(&cfg.cost.p_f);
    if pf_min < -1e-10 {
        v.push(Violation::TerminalWeightNotPositiveSemidefinite { min_eigenvalue: pf_min });
    }
    if !cfg.x_set.contains_origin_strictly() {
        v.push(Violation::OriginNotInterior { set: "X".into() });
    }
    if !cfg.u_set.contains_origin_strictly() {
        v.push(Violation::OriginNotInterior { set: "U".into() });
    }
    if cfg.m < 1 || cfg.n < 1 || cfg.m > cfg.n {
        v.push(Violation::HorizonOrder { m: cfg.m, n: cfg.n });
    }
    if !(cfg.a >= 0.0) {
        v.push(Violation::NegativeWeight { a: cfg.a });
    }
    if let Some((a, b)) = cfg.model.matrices() {
        let rank = kalman_rank(a, b);
        if rank < n {
            v.push(Violation::Uncontrollable { rank, n });
        }
    }
    if !cfg.xf.is_well_formed() {
        v.push(Violation::TerminalSetMalformed);
    } else if let (TerminalSet::Ellipsoid { p, gamma }, Some(k)) = (&cfg.xf, &cfg.terminal_gain) {
        if let Some(worst) = invariance_slack(cfg, p, *gamma, k) {
            if worst > INVARIANCE_TOL {
                v.push(Violation::TerminalNotInvariant { worst_slack: worst });
            }
        }
    }
    ValidationReport { violations: v }
}

/// Largest `V_f(f(x, -Kx)) - V_f(x) + l(x, -Kx)` over sampled boundary points.
fn invariance_slack(cfg: &Ps2fConfig, p: &DMatrix<f64>, gamma: f64, k: &DMatrix<f64>) -> Option<f64> {
    let chol = p.clone().cholesky()?;
    // x = sqrt(gamma) L^-T d gives x' P x = gamma
    let lt = chol.l().transpose();
    let lt_inv = lt.try_inverse()?;
    let mut worst = f64::NEG_INFINITY;
    for d in sphere_directions(cfg.state_dim(), INVARIANCE_SAMPLES) {
        let x = gamma.sqrt() * &lt_inv * d;
        let u = -(k * &x);
        let xn = cfg.model.step(&x, &u);
        let s = cfg.cost.terminal(&xn) - cfg.cost.terminal(&x) + cfg.cost.stage(&x, &u);
        worst = worst.max(s);
    }
    Some(worst)
}
