//! Damped semismooth Newton for the discounted and ergodic systems.
//!
//! For `m = inf` the generalized Jacobian selects one branch per node, so a
//! full Newton step is one step of policy iteration. When the line search
//! cannot decrease the residual norm a policy step is taken anyway; for
//! finite `m` that situation is a [`Error::StepFailure`].

use log::{debug, trace};
use serde::Serialize;

use crate::discretize::{
    assemble_constrained, assemble_discounted, assemble_ergodic, BoundaryCondition,
    DiscreteOperator, Mesh, ZerothOrder,
};
use crate::error::{Error, Result};
use crate::linalg::{solve_bordered, Tridiagonal};
use crate::model::{Exponent, GridFunction, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    /// Convergence threshold on `‖F‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest line-search step before giving up.
    pub min_step: f64,
    /// Reach large `m` by doubling from `m = 4`.
    pub continuation: bool,
    pub boundary: BoundaryCondition,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-10,
            max_iter: 200,
            min_step: 1e-12,
            continuation: true,
            boundary: BoundaryCondition::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    /// Accepted step length per iteration.
    pub damping: Vec<f64>,
    pub converged: bool,
    /// Tolerance actually enforced: the requested one, raised to the
    /// roundoff level of the `h^-2`-scaled rows when that is larger.
    pub tolerance: f64,
}

impl SolveReport {
    fn absorb(&mut self, stage: SolveReport) {
        self.iterations += stage.iterations;
        self.final_residual = stage.final_residual;
        self.damping.extend(stage.damping);
        self.converged = stage.converged;
        self.tolerance = self.tolerance.max(stage.tolerance);
    }
}

#[derive(Debug, Clone)]
pub struct DiscountedSolution {
    pub values: Vec<f64>,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct DirectSolution {
    pub lambda: f64,
    pub u: GridFunction,
    pub report: SolveReport,
}

/// Roundoff allowance per unit of `‖v‖_∞ / h^2`.
const ROUNDOFF_FACTOR: f64 = 16.0;

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn l2_norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton iteration on a state vector with caller-supplied residual and
/// direction maps.
fn newton<R, D>(
    mut x: Vec<f64>,
    settings: &SolverSettings,
    row_scale: f64,
    policy: bool,
    residual: R,
    direction: D,
) -> Result<(Vec<f64>, SolveReport)>
where
    R: Fn(&[f64]) -> Vec<f64>,
    D: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let tol_at = |x: &[f64]| settings.tol.max(ROUNDOFF_FACTOR * f64::EPSILON * row_scale * inf_norm(x));
    let mut f = residual(&x);
    let mut report = SolveReport {
        final_residual: inf_norm(&f),
        tolerance: tol_at(&x),
        ..SolveReport::default()
    };
    for it in 0..settings.max_iter {
        let r = inf_norm(&f);
        report.final_residual = r;
        report.tolerance = tol_at(&x);
        if r <= report.tolerance {
            report.converged = true;
            return Ok((x, report));
        }
        let dx = direction(&x)?;
        let norm0 = l2_norm(&f);
        let mut t = 1.0;
        let mut accepted: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut full: Option<(Vec<f64>, Vec<f64>)> = None;
        while t >= settings.min_step {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + t * d).collect();
            let ft = residual(&xt);
            let nt = l2_norm(&ft);
            if nt.is_finite() && nt <= (1.0 - 1e-4 * t) * norm0 {
                accepted = Some((xt, ft));
                break;
            }
            if t == 1.0 && policy && nt.is_finite() {
                full = Some((xt, ft));
            }
            t *= 0.5;
        }
        let (xn, fnew, step) = match (accepted, full) {
            (Some((xa, fa)), _) => (xa, fa, t),
            (None, Some((xf, ff))) => (xf, ff, 1.0),
            (None, None) => {
                return Err(Error::StepFailure {
                    iteration: it,
                    residual: r,
                })
            }
        };
        trace!("newton it {it}: |F| = {r:.3e}, step {step}");
        x = xn;
        f = fnew;
        report.iterations = it + 1;
        report.damping.push(step);
    }
    report.final_residual = inf_norm(&f);
    report.tolerance = tol_at(&x);
    if report.final_residual <= report.tolerance {
        report.converged = true;
        return Ok((x, report));
    }
    Err(Error::NoConvergence(report))
}

/// Solves a discounted operator from `initial` (zero when `None`).
pub fn solve_discounted(
    op: &DiscreteOperator,
    initial: Option<&[f64]>,
    settings: &SolverSettings,
) -> Result<DiscountedSolution> {
    if !matches!(op.zeroth_order(), ZerothOrder::Discount(_)) {
        return Err(Error::domain("solve_discounted needs a discounted operator"));
    }
    let n = op.mesh().n_nodes();
    let x0 = match initial {
        Some(v) if v.len() == n => v.to_vec(),
        Some(v) => {
            return Err(Error::domain(format!(
                "initial guess has {} values, mesh has {n}",
                v.len()
            )))
        }
        None => vec![0.0; n],
    };
    let policy = op.exponent().is_infinite();
    let h = op.mesh().spacing();
    let (values, report) = newton(
        x0,
        settings,
        1.0 / (h * h),
        policy,
        |v| op.residual(v, 0.0),
        |v| {
            let lin = op.linearize(v, 0.0);
            let t = Tridiagonal::factor(&lin.lower, &lin.diag, &lin.upper)?;
            let rhs: Vec<f64> = lin.residual.iter().map(|r| -r).collect();
            Ok(t.solve(&rhs))
        },
    )?;
    Ok(DiscountedSolution { values, report })
}

/// Solves an ergodic operator for `(lambda, v)` with `v` pinned to zero at
/// the origin node.
pub fn solve_ergodic_operator(
    op: &DiscreteOperator,
    initial: Option<(f64, &[f64])>,
    settings: &SolverSettings,
) -> Result<DirectSolution> {
    if op.zeroth_order() != ZerothOrder::Ergodic {
        return Err(Error::domain("solve_ergodic_operator needs an ergodic operator"));
    }
    let mesh = op.mesh();
    let n = mesh.n_nodes();
    let k = mesh.origin_index();
    let mut x0 = match initial {
        Some((l, v)) if v.len() == n => {
            let mut x: Vec<f64> = v.iter().map(|a| a - v[k]).collect();
            x.push(l);
            x
        }
        Some((_, v)) => {
            return Err(Error::domain(format!(
                "initial guess has {} values, mesh has {n}",
                v.len()
            )))
        }
        None => {
            let mut x = vec![0.0; n + 1];
            let gmin = op.forcing().iter().copied().fold(f64::INFINITY, f64::min);
            x[n] = gmin.min(0.0);
            x
        }
    };
    x0[k] = 0.0;
    let policy = op.exponent().is_infinite();
    let h = mesh.spacing();
    let (x, report) = newton(
        x0,
        settings,
        1.0 / (h * h),
        policy,
        |x| op.residual(&x[..n], x[n]),
        |x| {
            let lin = op.linearize(&x[..n], x[n]);
            let rhs: Vec<f64> = lin.residual.iter().map(|r| -r).collect();
            let (mut dv, dl) =
                solve_bordered(&lin.lower, &lin.diag, &lin.upper, &lin.lambda_col, &rhs, k)?;
            dv.push(dl);
            Ok(dv)
        },
    )?;
    let lambda = x[n];
    let u = GridFunction::normalized(mesh.nodes(), x[..n].to_vec(), mesh.spacing(), k);
    Ok(DirectSolution { lambda, u, report })
}

/// Exponents visited on the way to `target`: `4, 8, 16, ...` below the
/// target, then the target itself.
pub fn continuation_path(target: &Exponent, enabled: bool) -> Vec<Exponent> {
    let mut path = Vec::new();
    if enabled {
        let mut m = 4.0;
        while target.m().map_or(m <= 64.0, |t| m < t) {
            path.push(Exponent::finite(m).expect("m >= 4"));
            m *= 2.0;
        }
    }
    path.push(*target);
    path
}

/// Smallest forcing increment the homotopy may take.
const MIN_HOMOTOPY_STEP: f64 = 1.0 / 1024.0;

/// Walks the forcing scale `t` from 0 to 1, warm-starting each solve from
/// the previous one and halving the increment after a failure.
fn forcing_homotopy<S>(mut solve: impl FnMut(f64, Option<&S>) -> Result<S>) -> Result<S> {
    let mut state = solve(0.0, None)?;
    let mut t = 0.0_f64;
    let mut dt = 0.25_f64;
    while t < 1.0 {
        let next = (t + dt).min(1.0);
        match solve(next, Some(&state)) {
            Ok(s) => {
                state = s;
                t = next;
                dt = (2.0 * dt).min(0.5);
            }
            Err(e) => {
                dt *= 0.5;
                if dt < MIN_HOMOTOPY_STEP {
                    return Err(e);
                }
            }
        }
    }
    Ok(state)
}

fn scaled_forcing(spec: &ProblemSpec, t: f64) -> ProblemSpec {
    spec.with_beta(t * spec.beta).with_shift(t * spec.shift)
}

/// One ergodic solve at fixed exponent, falling back to a forcing homotopy
/// when Newton fails from `init`.
fn direct_stage(
    mesh: &Mesh,
    spec: &ProblemSpec,
    init: Option<(f64, &[f64])>,
    settings: &SolverSettings,
    report: &mut SolveReport,
) -> Result<DirectSolution> {
    let op = assemble_ergodic(mesh, spec, settings.boundary)?;
    match solve_ergodic_operator(&op, init, settings) {
        Ok(s) => {
            report.absorb(s.report.clone());
            Ok(s)
        }
        Err(e) if settings.continuation => {
            debug!("m = {}: {e}; retrying by forcing homotopy", spec.exponent);
            forcing_homotopy(|t, prev: Option<&DirectSolution>| {
                let op = assemble_ergodic(mesh, &scaled_forcing(spec, t), settings.boundary)?;
                let init = prev.map(|p| (p.lambda, p.u.values()));
                let s = solve_ergodic_operator(&op, init, settings)?;
                report.absorb(s.report.clone());
                Ok(s)
            })
        }
        Err(e) => Err(e),
    }
}

/// Direct solve of the ergodic problem on `mesh`.
///
/// Finite exponents above 4 are reached by doubling from `m = 4`; `m = inf`
/// is attempted directly first. Any stage whose Newton iteration fails is
/// retried by homotopy in the forcing strength.
pub fn solve_direct_ergodic(
    mesh: &Mesh,
    spec: &ProblemSpec,
    settings: &SolverSettings,
) -> Result<DirectSolution> {
    let mut report = SolveReport::default();
    if spec.exponent.is_infinite() {
        match direct_stage(mesh, spec, None, settings, &mut report) {
            Ok(mut s) => {
                s.report = report;
                return Ok(s);
            }
            Err(e) if settings.continuation => {
                debug!("policy iteration failed ({e}); warm-starting from finite m");
                report = SolveReport::default();
            }
            Err(e) => return Err(e),
        }
    }
    let mut last: Option<DirectSolution> = None;
    for e in continuation_path(&spec.exponent, settings.continuation) {
        let init = last.as_ref().map(|s| (s.lambda, s.u.values()));
        let sol = direct_stage(mesh, &spec.with_exponent(e), init, settings, &mut report)?;
        debug!(
            "m = {e}: lambda = {:.12e} after {} iterations",
            sol.lambda, sol.report.iterations
        );
        last = Some(sol);
    }
    let mut sol = last.expect("continuation path is nonempty");
    sol.report = report;
    Ok(sol)
}

fn discount_stage(
    mesh: &Mesh,
    spec: &ProblemSpec,
    delta: f64,
    init: Option<&[f64]>,
    settings: &SolverSettings,
    report: &mut SolveReport,
) -> Result<DiscountedSolution> {
    let build = |s: &ProblemSpec| {
        if s.exponent.is_infinite() {
            assemble_constrained(mesh, s, delta, settings.boundary)
        } else {
            assemble_discounted(mesh, s, delta, settings.boundary)
        }
    };
    match solve_discounted(&build(spec)?, init, settings) {
        Ok(s) => {
            report.absorb(s.report.clone());
            Ok(s)
        }
        Err(e) if settings.continuation => {
            debug!("delta = {delta:e}: {e}; retrying by forcing homotopy");
            forcing_homotopy(|t, prev: Option<&DiscountedSolution>| {
                let op = build(&scaled_forcing(spec, t))?;
                let s = solve_discounted(&op, prev.map(|p| p.values.as_slice()), settings)?;
                report.absorb(s.report.clone());
                Ok(s)
            })
        }
        Err(e) => Err(e),
    }
}

/// Discounted solve of `spec` at discount `delta`. Without a warm start,
/// large exponents are reached by continuation as in
/// [`solve_direct_ergodic`].
pub fn solve_discounted_spec(
    mesh: &Mesh,
    spec: &ProblemSpec,
    delta: f64,
    initial: Option<&[f64]>,
    settings: &SolverSettings,
) -> Result<DiscountedSolution> {
    let mut report = SolveReport::default();
    if initial.is_some() || spec.exponent.is_infinite() {
        match discount_stage(mesh, spec, delta, initial, settings, &mut report) {
            Ok(mut s) => {
                s.report = report;
                return Ok(s);
            }
            Err(e) if initial.is_none() && settings.continuation => {
                debug!("policy iteration failed ({e}); warm-starting from finite m");
                report = SolveReport::default();
            }
            Err(e) => return Err(e),
        }
    }
    let mut state: Option<Vec<f64>> = None;
    for e in continuation_path(&spec.exponent, settings.continuation) {
        let sol = discount_stage(
            mesh,
            &spec.with_exponent(e),
            delta,
            state.as_deref(),
            settings,
            &mut report,
        )?;
        state = Some(sol.values);
    }
    Ok(DiscountedSolution {
        values: state.expect("continuation path is nonempty"),
        report,
    })
}
