//! Damped Newton solver for `F(D^2 u) = f` in the unit ball or disk with the
//! Neumann condition `u_nu = -eps u + phi`, plus `delta`-regularization of
//! degenerate right-hand sides and `eps -> 0` continuation.
//!
//! Newton runs on the root form `Ft(D^2 u) - (f + delta)^{1/(k-l)}`. Every
//! accepted iterate is admissible at all equation nodes.

pub mod data;
pub mod grid;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HqError, Result};
use crate::linalg::BandedMatrix;
use crate::operator::{HqOperator, OperatorConfig};

pub use data::{ExactSpec, FSpec, PhiSpec};
pub use grid::{
    radial_spectrum, Discretization, DiskGrid, Grid, NodeCoord, RadialGrid, Row, ScalarField,
};

/// Resolved problem data on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub cfg: OperatorConfig,
    pub grid: Grid,
    /// `f` at every node.
    pub f: Vec<f64>,
    /// `phi` at the boundary nodes, in [`Grid::boundary_nodes`] order.
    pub phi: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
}

impl ProblemSpec {
    pub fn new(
        cfg: OperatorConfig,
        grid: Grid,
        f: Vec<f64>,
        phi: Vec<f64>,
        eps: f64,
        delta: f64,
    ) -> Result<Self> {
        let ps = ProblemSpec {
            cfg,
            grid,
            f,
            phi,
            eps,
            delta,
        };
        ps.validate()?;
        Ok(ps)
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if matches!(self.grid, Grid::Disk(_)) && self.cfg.n != 2 {
            return Err(HqError::invalid(format!(
                "the disk geometry needs n = 2, got n = {}",
                self.cfg.n
            )));
        }
        if self.f.len() != self.grid.node_count() {
            return Err(HqError::invalid("f must have one value per node"));
        }
        if self.phi.len() != self.grid.boundary_nodes().len() {
            return Err(HqError::invalid(
                "phi must have one value per boundary node",
            ));
        }
        if let Some(x) = self.f.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(HqError::invalid(format!(
                "f must be finite and non-negative, found {x}"
            )));
        }
        if self.phi.iter().any(|x| !x.is_finite()) {
            return Err(HqError::invalid("phi must be finite"));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(HqError::invalid(format!(
                "eps must be >= 0, got {}",
                self.eps
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(HqError::invalid(format!(
                "delta must be >= 0, got {}",
                self.delta
            )));
        }
        let min_f = self.f.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        if min_f == 0.0 && self.delta == 0.0 {
            return Err(HqError::invalid(
                "f vanishes somewhere and delta = 0: solve the regularized problem \
                 with f + delta, delta > 0, and let delta tend to zero afterwards",
            ));
        }
        Ok(())
    }

    /// `(f + delta)^{1/(k-l)}` at every node.
    pub fn rhs_root(&self) -> Vec<f64> {
        let e = 1.0 / self.cfg.order();
        self.f.iter().map(|x| (x + self.delta).powf(e)).collect()
    }

    pub fn sup_f_delta(&self) -> f64 {
        self.f.iter().fold(0.0f64, |m, &x| m.max(x)) + self.delta
    }

    /// `A = (1/(2p)) [C(N,l)/C(N,k) sup f_delta]^{1/(k-l)}`.
    pub fn barrier_coefficient(&self) -> f64 {
        let cfg = &self.cfg;
        (self.sup_f_delta() / cfg.unit_value()).powf(1.0 / cfg.order()) / (2.0 * cfg.p as f64)
    }

    /// `max{sup|phi|, |phi|_0 + A diam^2 + 2 A diam}` with `diam = 2`.
    pub fn m0_bound(&self) -> f64 {
        let sup_phi = self.phi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let a = self.barrier_coefficient();
        let diam = 2.0;
        sup_phi.max(sup_phi + a * diam * diam + 2.0 * a * diam)
    }
}

/// Parameters of [`newton_solve_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub min_step: f64,
}

impl NewtonOptions {
    pub fn for_grid(grid: &Grid) -> Self {
        NewtonOptions {
            tol: match grid {
                Grid::Radial(_) => 1e-9,
                Grid::Disk(_) => 1e-7,
            },
            max_iter: 50,
            min_step: 2f64.powi(-30),
        }
    }
}

/// Estimate-type quantities of a discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sup_eps_u: f64,
    pub sup_grad: f64,
    /// Largest Hessian eigenvalue magnitude over the equation nodes.
    pub sup_hess: f64,
    pub m0_bound: f64,
    /// `sup|eps u| <= M_0 + 1e-8`.
    pub m0_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub u: ScalarField,
    pub newton_iters: usize,
    /// Max over rows of the root-form and boundary residuals.
    pub final_residual_norm: f64,
    /// Max over equation nodes of `|F(D^2 u) - f_delta|`.
    pub quotient_residual_norm: f64,
    pub residual_trace: Vec<f64>,
    pub admissible_everywhere: bool,
    pub diagnostics: Diagnostics,
}

struct Linearization {
    residual: Vec<f64>,
    /// `Ft^{ij}` at equation rows.
    grads: Vec<Option<DMatrix<f64>>>,
    quotient_residual: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn linearize(
    disc: &Discretization,
    op: &HqOperator,
    ps: &ProblemSpec,
    rhs: &[f64],
    u: &[f64],
) -> Result<Linearization> {
    let dim = disc.dim();
    let mut residual = vec![0.0; dim];
    let mut grads = vec![None; dim];
    let mut quotient_residual = 0.0f64;
    for (i, row) in disc.rows.iter().enumerate() {
        match row {
            Row::Equation { .. } => {
                let h = disc.hessian(i, u).expect("equation row");
                let point = op
                    .evaluate(&h)
                    .map_err(|e| e.with_context(format!(" at node {i}")))?;
                residual[i] = point.ftilde_value - rhs[i];
                quotient_residual =
                    quotient_residual.max((point.f_value - ps.f[i] - ps.delta).abs());
                grads[i] = Some(op.gradient_at(&point)?.ftilde);
            }
            Row::Boundary { normal, phi_index } => {
                residual[i] = grid::apply(normal, u) + ps.eps * u[i] - ps.phi[*phi_index];
            }
        }
    }
    Ok(Linearization {
        residual,
        grads,
        quotient_residual,
    })
}

fn jacobian(disc: &Discretization, ps: &ProblemSpec, lin: &Linearization) -> BandedMatrix {
    let mut jac = BandedMatrix::new(disc.dim(), disc.kl, disc.ku);
    for (i, row) in disc.rows.iter().enumerate() {
        match row {
            Row::Equation { hess } => {
                let g = lin.grads[i].as_ref().expect("equation row");
                for (a, b, form) in hess {
                    let w = if a == b {
                        g[(*a, *a)]
                    } else {
                        2.0 * g[(*a, *b)]
                    };
                    for &(c, coef) in form {
                        jac.add(i, c, w * coef);
                    }
                }
            }
            Row::Boundary { normal, .. } => {
                for &(c, coef) in normal {
                    jac.add(i, c, coef);
                }
                jac.add(i, i, ps.eps);
            }
        }
    }
    jac
}

/// Residual of the discrete system at `u`: root-form rows at equation nodes,
/// `u_nu + eps u - phi` at boundary nodes.
pub fn assemble_residual(ps: &ProblemSpec, u: &ScalarField) -> Result<Vec<f64>> {
    ps.validate()?;
    check_field(ps, u)?;
    let disc = Discretization::new(ps.grid, ps.cfg.n)?;
    let op = HqOperator::new(ps.cfg)?;
    Ok(linearize(&disc, &op, ps, &ps.rhs_root(), &u.values)?.residual)
}

fn check_field(ps: &ProblemSpec, u: &ScalarField) -> Result<()> {
    if u.grid != ps.grid {
        return Err(HqError::invalid(
            "field and problem live on different grids",
        ));
    }
    Ok(())
}

/// `u_0 = A |x|^2`, whose Hessian `2A I` satisfies `F(D^2 u_0) = sup f_delta`.
pub fn initial_guess(ps: &ProblemSpec) -> ScalarField {
    let a = ps.barrier_coefficient();
    ScalarField::from_fn(ps.grid, |c| a * c.r * c.r)
}

pub fn estimate_monitor(ps: &ProblemSpec, u: &ScalarField) -> Result<Diagnostics> {
    check_field(ps, u)?;
    let disc = Discretization::new(ps.grid, ps.cfg.n)?;
    let sup_eps_u = ps.eps * u.max_abs();
    let m0_bound = ps.m0_bound();
    Ok(Diagnostics {
        sup_eps_u,
        sup_grad: inf_norm(&u.gradient_norms()),
        sup_hess: grid::max_hessian_norm(&disc, &u.values),
        m0_bound,
        m0_ok: sup_eps_u <= m0_bound + 1e-8,
    })
}

pub fn newton_solve(ps: &ProblemSpec, u0: &ScalarField) -> Result<SolveReport> {
    newton_solve_with(ps, u0, &NewtonOptions::for_grid(&ps.grid))
}

pub fn newton_solve_with(
    ps: &ProblemSpec,
    u0: &ScalarField,
    opts: &NewtonOptions,
) -> Result<SolveReport> {
    ps.validate()?;
    check_field(ps, u0)?;
    if ps.eps == 0.0 {
        return Err(HqError::invalid(
            "eps = 0 fixes u only up to a constant; reach it by continuation in eps",
        ));
    }
    let disc = Discretization::new(ps.grid, ps.cfg.n)?;
    let op = HqOperator::new(ps.cfg)?;
    let rhs = ps.rhs_root();

    let mut u = u0.values.clone();
    let mut lin =
        linearize(&disc, &op, ps, &rhs, &u).map_err(|e| e.with_context(" (initial guess)"))?;
    let mut norm = inf_norm(&lin.residual);
    let mut trace = vec![norm];
    let mut iters = 0;
    while norm > opts.tol {
        if iters == opts.max_iter {
            return Err(HqError::NonConvergence {
                iterations: iters,
                residual: norm,
                reason: format!("iteration limit reached; residual trace {trace:?}"),
            });
        }
        let rhs_vec: Vec<f64> = lin.residual.iter().map(|x| -x).collect();
        let du = jacobian(&disc, ps, &lin).solve(&rhs_vec)?;
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a + step * d).collect();
            match linearize(&disc, &op, ps, &rhs, &trial) {
                Ok(next) if inf_norm(&next.residual) < norm => {
                    u = trial;
                    lin = next;
                    break;
                }
                Ok(_) | Err(HqError::NotInCone { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
            if step < opts.min_step {
                return Err(HqError::NonConvergence {
                    iterations: iters,
                    residual: norm,
                    reason: format!("line search underflow; residual trace {trace:?}"),
                });
            }
        }
        norm = inf_norm(&lin.residual);
        trace.push(norm);
        iters += 1;
    }
    let field = ScalarField::new(ps.grid, u)?;
    let diagnostics = estimate_monitor(ps, &field)?;
    Ok(SolveReport {
        u: field,
        newton_iters: iters,
        final_residual_norm: norm,
        quotient_residual_norm: lin.quotient_residual,
        residual_trace: trace,
        admissible_everywhere: true,
        diagnostics,
    })
}

/// Problem description that can be re-resolved for any `(eps, delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSetup {
    pub cfg: OperatorConfig,
    pub grid: Grid,
    pub f: FSpec,
    pub phi: PhiSpec,
    #[serde(default)]
    pub exact: Option<ExactSpec>,
    pub eps: f64,
    #[serde(default)]
    pub delta: f64,
}

impl ProblemSetup {
    pub fn resolve(&self) -> Result<ProblemSpec> {
        self.resolve_at(self.eps, self.delta)
    }

    pub fn resolve_at(&self, eps: f64, delta: f64) -> Result<ProblemSpec> {
        if let Some(e) = &self.exact {
            e.validate(&self.grid)?;
        }
        let f = self.f.sample(&self.grid, &self.cfg, self.exact.as_ref())?;
        let phi = self.phi.sample(&self.grid, eps, self.exact.as_ref())?;
        ProblemSpec::new(self.cfg, self.grid, f, phi, eps, delta)
    }

    /// The exact solution on the grid, when one is given.
    pub fn exact_field(&self) -> Option<ScalarField> {
        self.exact
            .as_ref()
            .map(|e| ScalarField::from_fn(self.grid, |c| e.value(c)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationStep {
    pub eps: f64,
    pub delta: f64,
    pub newton_iters: usize,
    pub final_residual_norm: f64,
    pub mean_u: f64,
    /// `-eps mean(u)`.
    pub constant_c: f64,
    /// `max - min` of `-eps u`.
    pub osc: f64,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub u: ScalarField,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationFailure {
    pub index: usize,
    pub eps: f64,
    pub delta: f64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationResult {
    pub steps: Vec<ContinuationStep>,
    /// `u - mean(u)` of the last successful solve.
    pub v: Option<ScalarField>,
    /// `-eps mean(u)` at the smallest `eps` of the last `delta`.
    pub constant_c: Option<f64>,
    pub failure: Option<ContinuationFailure>,
}

impl ContinuationResult {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    /// Steps at one `delta`, in schedule order.
    pub fn at_delta(&self, delta: f64) -> Vec<&ContinuationStep> {
        self.steps.iter().filter(|s| s.delta == delta).collect()
    }

    /// Steps at one `eps`, in schedule order.
    pub fn at_eps(&self, eps: f64) -> Vec<&ContinuationStep> {
        self.steps.iter().filter(|s| s.eps == eps).collect()
    }
}

/// Discrete `C^1` distance `max|u - w| + max|D(u - w)|`.
pub fn c1_distance(u: &ScalarField, w: &ScalarField) -> f64 {
    let diff = ScalarField {
        grid: u.grid,
        values: u.values.iter().zip(&w.values).map(|(a, b)| a - b).collect(),
    };
    diff.max_abs() + inf_norm(&diff.gradient_norms())
}

pub(crate) fn check_schedule(name: &str, s: &[f64], allow_zero: bool) -> Result<()> {
    if s.is_empty() {
        return Err(HqError::invalid(format!("{name} schedule is empty")));
    }
    if s.iter()
        .any(|&x| !x.is_finite() || x < 0.0 || (!allow_zero && x == 0.0))
    {
        return Err(HqError::invalid(format!(
            "{name} schedule has invalid entries {s:?}"
        )));
    }
    if s.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HqError::invalid(format!(
            "{name} schedule must be strictly decreasing"
        )));
    }
    Ok(())
}

/// Solves along `delta` (outer) and `eps` (inner) schedules, warm-starting
/// each solve from the previous one. The warm start keeps `u - mean(u)` and
/// replaces the mean by the previous estimate `-c / eps_new` of the new mean.
pub fn continuation(
    setup: &ProblemSetup,
    eps_schedule: &[f64],
    delta_schedule: &[f64],
) -> Result<ContinuationResult> {
    check_schedule("eps", eps_schedule, false)?;
    check_schedule("delta", delta_schedule, true)?;
    let n = setup.cfg.n;
    let mut steps: Vec<ContinuationStep> = Vec::new();
    let mut failure = None;
    'outer: for &delta in delta_schedule {
        for &eps in eps_schedule {
            let index = steps.len();
            let fail = |message: String| ContinuationFailure {
                index,
                eps,
                delta,
                message,
            };
            let ps = match setup.resolve_at(eps, delta) {
                Ok(ps) => ps,
                Err(e) => {
                    failure = Some(fail(e.to_string()));
                    break 'outer;
                }
            };
            let guess = match steps.last() {
                Some(prev) => {
                    let shift = prev.eps * prev.mean_u / eps - prev.mean_u;
                    ScalarField {
                        grid: ps.grid,
                        values: prev.u.values.iter().map(|x| x + shift).collect(),
                    }
                }
                None => initial_guess(&ps),
            };
            let report = match newton_solve(&ps, &guess) {
                Ok(r) => r,
                // a poor warm start is retried from the barrier
                Err(_) if index > 0 => match newton_solve(&ps, &initial_guess(&ps)) {
                    Ok(r) => r,
                    Err(e) => {
                        failure = Some(fail(e.to_string()));
                        break 'outer;
                    }
                },
                Err(e) => {
                    failure = Some(fail(e.to_string()));
                    break 'outer;
                }
            };
            let mean_u = report.u.mean(n);
            let osc = eps * report.u.oscillation();
            steps.push(ContinuationStep {
                eps,
                delta,
                newton_iters: report.newton_iters,
                final_residual_norm: report.final_residual_norm,
                mean_u,
                constant_c: -eps * mean_u,
                osc,
                diagnostics: report.diagnostics,
                u: report.u,
            });
        }
    }
    let v = steps.last().map(|s| ScalarField {
        grid: s.u.grid,
        values: s.u.values.iter().map(|x| x - s.mean_u).collect(),
    });
    let constant_c = if failure.is_none() {
        steps.last().map(|s| s.constant_c)
    } else {
        None
    };
    Ok(ContinuationResult {
        steps,
        v,
        constant_c,
        failure,
    })
}
