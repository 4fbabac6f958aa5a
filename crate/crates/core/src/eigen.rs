//! Eigenvalue estimates from direct solves and vanishing-discount
//! extrapolation.
//!
//! Every estimate is `min(shift, lambda_R)` where `lambda_R` is the
//! eigenvalue of the truncated problem and `shift` is the far-field level of
//! the forcing (zero unless a constant shift is applied). The whole-space
//! eigenvalue never exceeds the far-field level, while the outward-slope
//! truncation can only overshoot it; the raw value is kept in the
//! diagnostics.

use log::debug;
use serde::Serialize;

use crate::discretize::Mesh;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::model::{Diagnostics, EigenEstimate, GridFunction, Method, ProblemSpec};
use crate::solver::{self, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenSettings {
    pub solver: SolverSettings,
    pub execution: Execution,
    /// Cross-method disagreement that triggers a warning.
    pub disagreement_tol: f64,
    /// Successive-radius change below which an R-sweep counts as stable.
    pub stabilization_tol: f64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings {
            solver: SolverSettings::default(),
            execution: Execution::default(),
            disagreement_tol: 5e-3,
            stabilization_tol: 1e-5,
        }
    }
}

/// `delta_k = 0.1 * 4^{-k}`, `k = 0..=5`.
pub fn default_delta_sequence() -> Vec<f64> {
    (0..6).map(|k| 0.1 * 0.25f64.powi(k)).collect()
}

/// `sup |u(x) - u(y)| / |x - y|^alpha` over all node pairs.
pub fn holder_seminorm(u: &GridFunction, alpha: f64, mode: Execution) -> f64 {
    holder_seminorm_within(u, alpha, f64::INFINITY, mode)
}

/// [`holder_seminorm`] restricted to nodes with `|x| <= radius`. The
/// m-uniform Hölder bound is local; over `B_R` the slope-one far field adds
/// a factor of order `R^{1 - alpha}`.
pub fn holder_seminorm_within(u: &GridFunction, alpha: f64, radius: f64, mode: Execution) -> f64 {
    let (lo, hi) = match u.nodes().iter().position(|x| x.abs() <= radius) {
        Some(lo) => {
            let hi = u.nodes().iter().rposition(|x| x.abs() <= radius).unwrap_or(lo);
            (lo, hi + 1)
        }
        None => return 0.0,
    };
    let v = &u.values()[lo..hi];
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let h = u.spacing();
    let weights: Vec<f64> = (0..n)
        .map(|k| if k == 0 { 0.0 } else { (k as f64 * h).powf(-alpha) })
        .collect();
    exec::max_range(mode, n - 1, |i| {
        let vi = v[i];
        v[i + 1..]
            .iter()
            .zip(&weights[1..])
            .fold(0.0_f64, |m, (vj, w)| m.max((vj - vi).abs() * w))
    })
    .max(0.0)
}

/// `min(shift, lambda_R)`; the raw value stays in the diagnostics.
fn capped(spec: &ProblemSpec, truncated: f64, diag: &mut Diagnostics) -> f64 {
    diag.truncated_lambda = truncated;
    truncated.min(spec.shift)
}

/// Direct solve, returning the estimate and the normalized profile.
pub fn direct_with_profile(
    mesh: &Mesh,
    spec: &ProblemSpec,
    settings: &EigenSettings,
) -> Result<(EigenEstimate, GridFunction)> {
    let sol = solver::solve_direct_ergodic(mesh, spec, &settings.solver)?;
    let mut diagnostics = Diagnostics {
        iterations: sol.report.iterations,
        radius: mesh.radius(),
        n_cells: mesh.n_cells(),
        tolerance: sol.report.tolerance,
        ..Diagnostics::default()
    };
    let lambda = capped(spec, sol.lambda, &mut diagnostics);
    let holder = holder_seminorm(&sol.u, spec.exponent.alpha(), settings.execution);
    Ok((
        EigenEstimate {
            lambda,
            method: Method::DirectErgodic,
            residual_inf_norm: sol.report.final_residual,
            holder_seminorm: holder,
            diagnostics,
        },
        sol.u,
    ))
}

pub fn lambda_via_direct(
    mesh: &Mesh,
    spec: &ProblemSpec,
    settings: &EigenSettings,
) -> Result<EigenEstimate> {
    direct_with_profile(mesh, spec, settings).map(|(e, _)| e)
}

/// Vanishing-discount estimate: `delta_k v_k(0)` for each discount, then
/// the linear fit `lambda + a delta` through the last two points. The third
/// to last point measures the fit residual.
pub fn lambda_via_discount(
    mesh: &Mesh,
    spec: &ProblemSpec,
    deltas: &[f64],
    settings: &EigenSettings,
) -> Result<EigenEstimate> {
    if deltas.len() < 3 {
        return Err(Error::domain("discount extrapolation needs at least three discounts"));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::domain("discounts must be positive and decreasing"));
    }
    let k = mesh.origin_index();
    let mut values = Vec::with_capacity(deltas.len());
    let mut iterations = 0;
    let mut residual: f64 = 0.0;
    let mut tolerance: f64 = 0.0;
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut last_v = Vec::new();
    for &delta in deltas {
        // v_δ ≈ w/δ + u: shift the previous solution to the new level.
        let init = prev.as_ref().map(|(d0, v)| {
            let w = d0 * v[k];
            v.iter().map(|x| x + w * (1.0 / delta - 1.0 / d0)).collect::<Vec<f64>>()
        });
        let sol = solver::solve_discounted_spec(mesh, spec, delta, init.as_deref(), &settings.solver)
            .map_err(|e| Error::Discount {
                delta,
                source: Box::new(e),
            })?;
        iterations += sol.report.iterations;
        residual = residual.max(sol.report.final_residual);
        tolerance = tolerance.max(sol.report.tolerance);
        let w = delta * sol.values[k];
        debug!("delta = {delta:e}: delta v(0) = {w:.12e}");
        values.push(w);
        last_v = sol.values.clone();
        prev = Some((delta, sol.values));
    }
    let n = deltas.len();
    let (d1, d2) = (deltas[n - 2], deltas[n - 1]);
    let (w1, w2) = (values[n - 2], values[n - 1]);
    let slope = (w2 - w1) / (d2 - d1);
    let extrapolated = w2 - slope * d2;
    let fit_residual = (values[n - 3] - (extrapolated + slope * deltas[n - 3])).abs();

    let mut diagnostics = Diagnostics {
        iterations,
        radius: mesh.radius(),
        n_cells: mesh.n_cells(),
        delta_sequence: deltas.to_vec(),
        discount_values: values,
        fit_residual: Some(fit_residual),
        tolerance,
        ..Diagnostics::default()
    };
    let lambda = capped(spec, extrapolated, &mut diagnostics);
    let profile = GridFunction::normalized(mesh.nodes(), last_v, mesh.spacing(), k);
    let holder = holder_seminorm(&profile, spec.exponent.alpha(), settings.execution);
    Ok(EigenEstimate {
        lambda,
        method: Method::VanishingDiscount,
        residual_inf_norm: residual,
        holder_seminorm: holder,
        diagnostics,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RPoint {
    pub radius: f64,
    pub n_cells: usize,
    pub lambda: f64,
    pub truncated_lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RSweep {
    pub points: Vec<RPoint>,
    pub stabilized: bool,
    /// Estimate at the largest radius.
    pub lambda: f64,
}

/// Repeats an estimate on growing truncation radii at fixed spacing `h`.
pub fn r_sweep(
    spec: &ProblemSpec,
    radii: &[f64],
    spacing: f64,
    method: Method,
    deltas: &[f64],
    settings: &EigenSettings,
) -> Result<RSweep> {
    if radii.len() < 3 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("R-sweep needs at least three increasing radii"));
    }
    let runs = exec::map(settings.execution, radii, |&r| -> Result<RPoint> {
        let cells = (r / spacing).round() as usize;
        let n_cells = match spec.geometry {
            crate::model::Geometry::Line => 2 * cells,
            crate::model::Geometry::Radial => cells,
        };
        let mesh = Mesh::for_spec(spec, r, n_cells.max(4))?;
        let est = match method {
            Method::VanishingDiscount => lambda_via_discount(&mesh, spec, deltas, settings)?,
            _ => lambda_via_direct(&mesh, spec, settings)?,
        };
        Ok(RPoint {
            radius: r,
            n_cells: mesh.n_cells(),
            lambda: est.lambda,
            truncated_lambda: est.diagnostics.truncated_lambda,
        })
    });
    let points = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let n = points.len();
    let stabilized =
        (points[n - 1].lambda - points[n - 2].lambda).abs() <= settings.stabilization_tol;
    Ok(RSweep {
        lambda: points[n - 1].lambda,
        points,
        stabilized,
    })
}

/// Direct and discount estimates on the same mesh. Returns the direct one,
/// with the disagreement recorded and a warning above the threshold.
pub fn cross_validate(
    mesh: &Mesh,
    spec: &ProblemSpec,
    deltas: &[f64],
    settings: &EigenSettings,
) -> Result<EigenEstimate> {
    let (direct, discount) = exec::join(
        settings.execution,
        || lambda_via_direct(mesh, spec, settings),
        || lambda_via_discount(mesh, spec, deltas, settings),
    );
    let mut direct = direct?;
    let discount = discount?;
    let gap = (direct.lambda - discount.lambda).abs();
    direct.diagnostics.disagreement = Some(gap);
    direct.diagnostics.delta_sequence = discount.diagnostics.delta_sequence;
    direct.diagnostics.discount_values = discount.diagnostics.discount_values;
    direct.diagnostics.fit_residual = discount.diagnostics.fit_residual;
    if gap > settings.disagreement_tol {
        direct.diagnostics.warnings.push(format!(
            "direct ({:.6e}) and discount ({:.6e}) estimates disagree by {gap:.3e}",
            direct.lambda, discount.lambda
        ));
    }
    Ok(direct)
}
