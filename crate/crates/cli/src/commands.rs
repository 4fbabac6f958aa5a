//! One runner per subcommand. Each returns its table and a JSON summary;
//! nothing touches the filesystem here.

use std::time::Instant;

use ergodic_core::analytic::exact_beta_plus_nonpositive_f;
use ergodic_core::discretize::Mesh;
use ergodic_core::eigen;
use ergodic_core::sweeps::{self, MPoint, SweepSettings};
use ergodic_core::{exec, EigenEstimate, Exponent, Geometry, Method, ProblemSpec};
use serde_json::{json, Value};

use crate::config::{Command, LoadedConfig, MethodName, Side};
use crate::error::{CliError, Result};
use crate::output::{Cell, Table};
use crate::verify;

pub struct Report {
    pub table: Table,
    pub summary: Value,
    pub warnings: Vec<String>,
    /// Some point or check failed; the table is still written.
    pub failed: bool,
}

/// Run-wide values repeated on every row.
pub struct Context<'a> {
    pub cfg: &'a LoadedConfig,
    pub run_id: String,
    pub settings: SweepSettings,
    /// Forcing perturbation applied to every problem built from the config.
    pub perturb: Option<(f64, ergodic_core::Potential)>,
    pub timing: bool,
}

impl Context<'_> {
    fn spec_with(&self, exponent: Exponent) -> Result<ProblemSpec> {
        let spec = self.cfg.spec_with(exponent)?;
        Ok(match &self.perturb {
            Some((eps, phi)) => spec.with_potential(spec.potential.plus(&phi.scaled(*eps))),
            None => spec,
        })
    }

    fn spec(&self) -> Result<ProblemSpec> {
        self.spec_with(self.cfg.exponent()?)
    }

    fn wall(&self, start: Instant) -> Cell {
        if self.timing {
            Cell::Float(start.elapsed().as_secs_f64() * 1e3)
        } else {
            Cell::Empty
        }
    }

    fn head(&self, mesh: &Mesh, m: Cell, beta: f64) -> Vec<Cell> {
        vec![
            Cell::text(&self.run_id),
            Cell::Int(mesh.dim() as u64),
            m,
            Cell::Float(beta),
            Cell::Float(mesh.radius()),
            Cell::Float(mesh.spacing()),
        ]
    }
}

const BASE: [&str; 12] = [
    "run_id",
    "N",
    "m",
    "beta",
    "R",
    "h",
    "method",
    "lambda",
    "residual",
    "holder_seminorm",
    "iterations",
    "wall_ms",
];

fn columns(extra: &[&'static str]) -> Vec<&'static str> {
    BASE.iter().chain(extra).copied().collect()
}

fn m_cell(m: f64) -> Cell {
    if m.is_infinite() {
        Cell::text("inf")
    } else {
        Cell::Float(m)
    }
}

fn exponent_cell(e: &Exponent) -> Cell {
    m_cell(e.m().unwrap_or(f64::INFINITY))
}

/// `method, lambda, residual, holder_seminorm, iterations`.
fn estimate_cells(method: &str, est: Option<&EigenEstimate>) -> Vec<Cell> {
    match est {
        Some(e) => vec![
            Cell::text(method),
            Cell::Float(e.lambda),
            Cell::Float(e.residual_inf_norm),
            Cell::Float(e.holder_seminorm),
            Cell::Int(e.diagnostics.iterations as u64),
        ],
        None => vec![Cell::text(method), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty],
    }
}

fn method_label(settings: &SweepSettings) -> &'static str {
    if settings.detection.cross_check {
        "cross"
    } else {
        "direct"
    }
}

pub fn run(command: Command, ctx: &Context) -> Result<Report> {
    match command {
        Command::Solve => solve(ctx),
        Command::Discount => discount(ctx),
        Command::MSweep => m_sweep(ctx),
        Command::BetaSweep => beta_sweep(ctx),
        Command::BetaBisect => beta_bisect(ctx),
        Command::Be0Floor => be0_floor(ctx),
        Command::VerifyAnalytic => verify_analytic(ctx),
    }
}

fn solve(ctx: &Context) -> Result<Report> {
    let spec = ctx.spec()?;
    let mesh = ctx.cfg.mesh()?;
    let s = &ctx.settings;
    let mut table = Table::new(columns(&[]));
    let mut warnings = Vec::new();
    let start = Instant::now();
    let estimates: Vec<(EigenEstimate, Cell)> = match ctx.cfg.run.method {
        MethodName::Direct => {
            let e = eigen::lambda_via_direct(&mesh, &spec, &s.eigen)?;
            vec![(e, ctx.wall(start))]
        }
        MethodName::Discount => {
            let e = eigen::lambda_via_discount(&mesh, &spec, &s.deltas, &s.eigen)?;
            vec![(e, ctx.wall(start))]
        }
        MethodName::Cross => {
            let (d, v) = exec::join(
                s.eigen.execution,
                || eigen::lambda_via_direct(&mesh, &spec, &s.eigen),
                || eigen::lambda_via_discount(&mesh, &spec, &s.deltas, &s.eigen),
            );
            let (d, v) = (d?, v?);
            let gap = (d.lambda - v.lambda).abs();
            if gap > s.eigen.disagreement_tol {
                warnings.push(format!(
                    "direct ({:.6e}) and discount ({:.6e}) estimates disagree by {gap:.3e}",
                    d.lambda, v.lambda
                ));
            }
            let wall = ctx.wall(start);
            vec![(d, wall.clone()), (v, wall)]
        }
    };
    let mut rows = Vec::new();
    for (est, wall) in &estimates {
        let mut row = ctx.head(&mesh, exponent_cell(&spec.exponent), spec.beta);
        row.extend(estimate_cells(&est.method.to_string(), Some(est)));
        row.push(wall.clone());
        table.push(row);
        warnings.extend(est.diagnostics.warnings.iter().cloned());
        rows.push(json!({ "method": est.method, "diagnostics": est.diagnostics }));
    }
    let disagreement = match estimates.as_slice() {
        [a, b] => Some((a.0.lambda - b.0.lambda).abs()),
        _ => None,
    };
    Ok(Report {
        table,
        summary: json!({ "estimates": rows, "disagreement": disagreement }),
        warnings,
        failed: false,
    })
}

fn discount(ctx: &Context) -> Result<Report> {
    let spec = ctx.spec()?;
    let mesh = ctx.cfg.mesh()?;
    let s = &ctx.settings;
    let start = Instant::now();
    let est = eigen::lambda_via_discount(&mesh, &spec, &s.deltas, &s.eigen)?;
    let wall = ctx.wall(start);
    let mut table = Table::new(columns(&["delta"]));
    let d = &est.diagnostics;
    for (delta, w) in d.delta_sequence.iter().zip(&d.discount_values) {
        let mut row = ctx.head(&mesh, exponent_cell(&spec.exponent), spec.beta);
        row.extend([
            Cell::text("discount-step"),
            Cell::Float(*w),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            wall.clone(),
            Cell::Float(*delta),
        ]);
        table.push(row);
    }
    // The extrapolated value sits at delta = 0.
    let mut row = ctx.head(&mesh, exponent_cell(&spec.exponent), spec.beta);
    row.extend(estimate_cells(&Method::VanishingDiscount.to_string(), Some(&est)));
    row.push(wall);
    row.push(Cell::Float(0.0));
    table.push(row);
    Ok(Report {
        table,
        summary: json!({ "diagnostics": est.diagnostics }),
        warnings: est.diagnostics.warnings.clone(),
        failed: false,
    })
}

fn m_sweep(ctx: &Context) -> Result<Report> {
    let m_list = ctx.cfg.m_list()?;
    let include_infinity = ctx.cfg.run.m_sweep.include_infinity;
    // The exponent is replaced at every point; `m`, when given, only fixes
    // default potential parameters.
    let exponent = match ctx.cfg.run.m {
        Some(_) => ctx.cfg.exponent()?,
        None => Exponent::infinite(),
    };
    let base = ctx.spec_with(exponent)?;
    let mesh = ctx.cfg.mesh()?;
    let start = Instant::now();
    let r = sweeps::m_sweep(&base, &mesh, &m_list, include_infinity, &ctx.settings)?;
    let wall = ctx.wall(start);
    let mut table = Table::new(columns(&["gap", "profile_distance", "lower_bound_holds", "error"]));
    let mut failed = false;
    let mut push = |p: &MPoint, method: &str| {
        failed |= p.error.is_some();
        let mut row = ctx.head(&mesh, m_cell(p.m), base.beta);
        row.extend(estimate_cells(method, p.estimate.as_ref()));
        row.extend([
            wall.clone(),
            Cell::opt_float(p.gap),
            Cell::opt_float(p.profile_distance),
            Cell::opt_bool(p.lower_bound_holds),
            p.error.clone().map_or(Cell::Empty, Cell::Text),
        ]);
        table.push(row);
    };
    for p in &r.points {
        push(p, "direct");
    }
    if let Some(p) = &r.surrogate {
        push(p, "direct");
    }
    if let Some(p) = &r.infinity {
        push(p, &Method::MSweepLimit.to_string());
    }
    let gaps: Vec<Option<f64>> = r.points.iter().map(|p| p.gap).collect();
    Ok(Report {
        table,
        summary: json!({
            "gaps": gaps,
            "gap_shrinks": r.gap_shrinks,
            "gaps_monotone": r.gaps_monotone,
            "lower_bound_slack": sweeps::LOWER_BOUND_SLACK,
            "surrogate_m": sweeps::SURROGATE_M,
            "lambda_inf": r.infinity.as_ref().and_then(MPoint::lambda),
        }),
        warnings: Vec::new(),
        failed,
    })
}

fn beta_sweep(ctx: &Context) -> Result<Report> {
    let betas = ctx.cfg.betas()?;
    let base = ctx.spec()?;
    let mesh = ctx.cfg.mesh()?;
    let start = Instant::now();
    let r = sweeps::beta_sweep(&base, &mesh, &betas, &ctx.settings)?;
    let wall = ctx.wall(start);
    let mut table = Table::new(columns(&["threshold", "on_plateau", "error"]));
    let method = method_label(&ctx.settings);
    let mut failed = false;
    let mut warnings = Vec::new();
    for p in &r.points {
        failed |= p.error.is_some();
        if let Some(e) = &p.estimate {
            warnings.extend(e.diagnostics.warnings.iter().cloned());
        }
        let mut row = ctx.head(&mesh, exponent_cell(&base.exponent), p.beta);
        row.extend(estimate_cells(method, p.estimate.as_ref()));
        row.extend([
            wall.clone(),
            Cell::Float(p.threshold),
            Cell::opt_bool(p.lambda().map(|l| l >= -p.threshold)),
            p.error.clone().map_or(Cell::Empty, Cell::Text),
        ]);
        table.push(row);
    }
    if base.geometry == Geometry::Line && !base.exponent.is_infinite() {
        warnings.push(
            "finite m on the line: lambda < 0 for every beta > 0, but |lambda| may fall below \
             the detection threshold near beta = 0"
                .into(),
        );
    }
    Ok(Report {
        table,
        summary: json!({
            "plateau": r.plateau,
            "thresholds": r.thresholds,
            "concavity_defect": r.concavity_defect(),
            "monotonicity_defect_positive": r.monotonicity_defect_positive(),
            "decreasing_beyond_plus": r.decreasing_beyond_plus(),
            "decreasing_beyond_minus": r.decreasing_beyond_minus(),
        }),
        warnings,
        failed,
    })
}

fn beta_bisect(ctx: &Context) -> Result<Report> {
    let cfg = &ctx.cfg.run.beta_bisect;
    let base = ctx.spec()?;
    let mesh = ctx.cfg.mesh()?;
    let s = &ctx.settings;
    let tol = ctx.cfg.run.tolerances.beta;
    let start = Instant::now();
    let (plus, minus, width, evaluations, notes) = match (cfg.bracket, cfg.side) {
        (Some(_), Side::Both) => {
            return Err(ctx.cfg.error_at(
                Some("beta_bisect"),
                "bracket",
                "an explicit bracket needs side = \"plus\" or \"minus\"",
            ))
        }
        (Some([zero, negative]), Side::Plus) => {
            let b = sweeps::bisect_beta_plus(&base, &mesh, (zero, negative), tol, s)?;
            (Some(b.beta), None, b.width, b.evaluations, Vec::new())
        }
        (Some([zero, negative]), Side::Minus) => {
            let b = sweeps::bisect_beta_minus(&base, &mesh, (zero, negative), tol, s)?;
            (None, Some(b.beta), b.width, b.evaluations, Vec::new())
        }
        (None, side) => {
            let probes = &cfg.probes;
            if probes.is_empty() || probes[0] <= 0.0 || probes.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(ctx.cfg.error_at(
                    Some("beta_bisect"),
                    "probes",
                    "probes must be positive and increasing",
                ));
            }
            let t = sweeps::estimate_thresholds(&base, &mesh, probes, tol, s)?;
            let evals = t.plus.iter().chain(t.minus.iter()).map(|b| b.evaluations).sum();
            let plus = (side != Side::Minus).then_some(t.thresholds.beta_plus);
            let minus = (side != Side::Plus).then_some(t.thresholds.beta_minus);
            (plus, minus, t.thresholds.bracket_width, evals, t.notes)
        }
    };
    let wall = ctx.wall(start);
    let oracle = if base.geometry == Geometry::Line && base.exponent.is_infinite() {
        exact_beta_plus_nonpositive_f(&base.potential, mesh.radius()).ok()
    } else {
        None
    };
    let mut table = Table::new(vec![
        "run_id",
        "N",
        "m",
        "R",
        "h",
        "method",
        "beta_plus",
        "beta_minus",
        "bracket_width",
        "evaluations",
        "oracle_beta_plus",
        "wall_ms",
    ]);
    table.push(vec![
        Cell::text(&ctx.run_id),
        Cell::Int(mesh.dim() as u64),
        exponent_cell(&base.exponent),
        Cell::Float(mesh.radius()),
        Cell::Float(mesh.spacing()),
        Cell::text(method_label(s)),
        Cell::opt_float(plus),
        Cell::opt_float(minus),
        Cell::Float(width),
        Cell::Int(evaluations as u64),
        Cell::opt_float(oracle),
        wall,
    ]);
    Ok(Report {
        table,
        summary: json!({
            "beta_plus": plus,
            "beta_minus": minus,
            "bracket_width": width,
            "tol_beta": tol,
            "oracle_beta_plus": oracle,
        }),
        warnings: notes,
        failed: false,
    })
}

fn be0_floor(ctx: &Context) -> Result<Report> {
    let exponents = ctx.cfg.floor_exponents()?;
    let c0 = ctx.cfg.run.be0_floor.c0;
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(ctx.cfg.error_at(Some("be0_floor"), "c0", "C0 must be positive"));
    }
    if ctx.cfg.geometry()? != Geometry::Radial || ctx.cfg.run.dim < 2 {
        return Err(ctx.cfg.error_at(None, "N", "the coupling floor needs radial geometry with N >= 2"));
    }
    let mesh = ctx.cfg.mesh()?;
    let tol = ctx.cfg.run.tolerances.be0;
    let start = Instant::now();
    let rows = sweeps::be0_floor_check(ctx.cfg.run.dim, &exponents, c0, &mesh, tol, &ctx.settings)
        .map_err(CliError::from)?;
    let wall = ctx.wall(start);
    let mut table = Table::new(vec![
        "run_id",
        "N",
        "m",
        "beta",
        "R",
        "h",
        "method",
        "lambda",
        "truncated_lambda",
        "tolerance",
        "passed",
        "wall_ms",
        "error",
    ]);
    let mut failed = false;
    for r in &rows {
        failed |= !r.passed;
        let mut row = ctx.head(&mesh, m_cell(r.m), r.beta);
        row.extend([
            Cell::text("direct"),
            Cell::opt_float(r.lambda),
            Cell::opt_float(r.truncated_lambda),
            Cell::Float(tol),
            Cell::Bool(r.passed),
            wall.clone(),
            r.error.clone().map_or(Cell::Empty, Cell::Text),
        ]);
        table.push(row);
    }
    Ok(Report {
        table,
        summary: json!({ "c0": c0, "rows": rows }),
        warnings: Vec::new(),
        failed,
    })
}

fn verify_analytic(ctx: &Context) -> Result<Report> {
    let checks = verify::run_checks(ctx.cfg.run.verify.inject);
    let mut table = Table::new(vec!["run_id", "check", "case", "value", "tolerance", "passed", "note"]);
    for c in &checks {
        table.push(vec![
            Cell::text(&ctx.run_id),
            Cell::text(c.check),
            Cell::text(&c.case),
            Cell::opt_float(c.value),
            Cell::Float(c.tolerance),
            Cell::Bool(c.passed),
            c.note.clone().map_or(Cell::Empty, Cell::Text),
        ]);
    }
    let failures = checks.iter().filter(|c| !c.passed).count();
    Ok(Report {
        table,
        summary: json!({
            "inject": ctx.cfg.run.verify.inject,
            "checks": checks.len(),
            "failures": failures,
        }),
        warnings: Vec::new(),
        failed: failures > 0,
    })
}
