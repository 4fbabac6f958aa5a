//! Monotone finite differences on truncated line and radial meshes.
//!
//! Every row of an assembled operator depends on at most three nodal values
//! and, for ergodic operators, on the unknown constant `lambda`. Boundary
//! conditions are folded into the stencils through affine ghost values, so
//! the schemes stay monotone and each row is convex in the state.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Exponent, Geometry, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh {
    geometry: Geometry,
    dim: usize,
    radius: f64,
    n_cells: usize,
    h: f64,
}

impl Mesh {
    /// `[-R, R]` with `n_cells` cells; `n_cells` must be even so that the
    /// origin is a node.
    pub fn line(radius: f64, n_cells: usize) -> Result<Self> {
        if !(radius > 0.0) || n_cells < 4 || !n_cells.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "line mesh needs R > 0 and an even cell count >= 4 (R = {radius}, n = {n_cells})"
            )));
        }
        Ok(Mesh {
            geometry: Geometry::Line,
            dim: 1,
            radius,
            n_cells,
            h: 2.0 * radius / n_cells as f64,
        })
    }

    /// `r in [0, R]` for radial profiles in `R^N`.
    pub fn radial(dim: usize, radius: f64, n_cells: usize) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) || n_cells < 2 {
            return Err(Error::domain(format!(
                "radial mesh needs N >= 1, R > 0 and n >= 2 (N = {dim}, R = {radius}, n = {n_cells})"
            )));
        }
        Ok(Mesh {
            geometry: Geometry::Radial,
            dim,
            radius,
            n_cells,
            h: radius / n_cells as f64,
        })
    }

    /// Mesh matching the geometry and dimension of `spec`.
    pub fn for_spec(spec: &ProblemSpec, radius: f64, n_cells: usize) -> Result<Self> {
        match spec.geometry {
            Geometry::Line => Mesh::line(radius, n_cells),
            Geometry::Radial => Mesh::radial(spec.dim, radius, n_cells),
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn origin_index(&self) -> usize {
        match self.geometry {
            Geometry::Line => self.n_cells / 2,
            Geometry::Radial => 0,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        match self.geometry {
            Geometry::Line => {
                if i == self.n_cells / 2 {
                    0.0
                } else {
                    -self.radius + i as f64 * self.h
                }
            }
            Geometry::Radial => i as f64 * self.h,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }
}

/// Condition imposed at the truncation boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BoundaryCondition {
    /// Zero outward slope (homogeneous Neumann).
    Reflecting,
    /// Prescribed outward slope `s`: `∂u/∂ν = s`.
    OutwardSlope(f64),
    /// Boundary values pinned to zero.
    DirichletZero,
}

impl Default for BoundaryCondition {
    fn default() -> Self {
        BoundaryCondition::OutwardSlope(1.0)
    }
}

impl BoundaryCondition {
    fn slope(self) -> f64 {
        match self {
            BoundaryCondition::OutwardSlope(s) => s,
            _ => 0.0,
        }
    }
}

/// Affine three-point form `lower v_{i-1} + diag v_i + upper v_{i+1} + constant`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Stencil {
    pub lower: f64,
    pub diag: f64,
    pub upper: f64,
    pub constant: f64,
}

impl Stencil {
    #[inline]
    fn apply(&self, v: &[f64], i: usize) -> f64 {
        let mut s = self.diag * v[i] + self.constant;
        if self.lower != 0.0 {
            s += self.lower * v[i - 1];
        }
        if self.upper != 0.0 {
            s += self.upper * v[i + 1];
        }
        s
    }

    #[inline]
    fn scaled(&self, a: f64) -> Stencil {
        Stencil {
            lower: a * self.lower,
            diag: a * self.diag,
            upper: a * self.upper,
            constant: a * self.constant,
        }
    }
}

/// Laplacian row at node `i`, with ghost values from `bc` at the ends.
pub fn laplacian_row(mesh: &Mesh, bc: BoundaryCondition, i: usize) -> Stencil {
    let h = mesh.h;
    let h2 = h * h;
    let n = mesh.n_cells;
    let s = bc.slope();
    match mesh.geometry {
        Geometry::Line => {
            if i == 0 {
                // v_{-1} = v_1 + 2 h s
                Stencil {
                    lower: 0.0,
                    diag: -2.0 / h2,
                    upper: 2.0 / h2,
                    constant: 2.0 * s / h,
                }
            } else if i == n {
                Stencil {
                    lower: 2.0 / h2,
                    diag: -2.0 / h2,
                    upper: 0.0,
                    constant: 2.0 * s / h,
                }
            } else {
                Stencil {
                    lower: 1.0 / h2,
                    diag: -2.0 / h2,
                    upper: 1.0 / h2,
                    constant: 0.0,
                }
            }
        }
        Geometry::Radial => {
            let nd = mesh.dim as f64;
            if i == 0 {
                Stencil {
                    lower: 0.0,
                    diag: -2.0 * nd / h2,
                    upper: 2.0 * nd / h2,
                    constant: 0.0,
                }
            } else if i == n {
                Stencil {
                    lower: 2.0 / h2,
                    diag: -2.0 / h2,
                    upper: 0.0,
                    constant: 2.0 * s / h + (nd - 1.0) * s / mesh.radius,
                }
            } else {
                let drift = (nd - 1.0) / (i as f64 * h);
                // Central drift is monotone iff 2i >= N - 1.
                if 2 * i + 1 >= mesh.dim {
                    Stencil {
                        lower: (1.0 - (nd - 1.0) / (2.0 * i as f64)) / h2,
                        diag: -2.0 / h2,
                        upper: 1.0 / h2 + drift / (2.0 * h),
                        constant: 0.0,
                    }
                } else {
                    // Forward difference keeps the drift monotone near r = 0
                    // in high dimension.
                    Stencil {
                        lower: 1.0 / h2,
                        diag: -2.0 / h2 - drift / h,
                        upper: 1.0 / h2 + drift / h,
                        constant: 0.0,
                    }
                }
            }
        }
    }
}

/// Backward and forward differences `(p_-, p_+)` at node `i`.
fn difference_rows(mesh: &Mesh, bc: BoundaryCondition, i: usize) -> (Stencil, Stencil) {
    let h = mesh.h;
    let n = mesh.n_cells;
    let s = bc.slope();
    let back = Stencil {
        lower: -1.0 / h,
        diag: 1.0 / h,
        ..Stencil::default()
    };
    let fwd = Stencil {
        diag: -1.0 / h,
        upper: 1.0 / h,
        ..Stencil::default()
    };
    let at_origin = mesh.geometry == Geometry::Radial && i == 0;
    let minus = if at_origin {
        // Even reflection: v_{-1} = v_1.
        Stencil {
            diag: 1.0 / h,
            upper: -1.0 / h,
            ..Stencil::default()
        }
    } else if i == 0 {
        // v_{-1} = v_1 + 2 h s
        Stencil {
            diag: 1.0 / h,
            upper: -1.0 / h,
            constant: -2.0 * s,
            ..Stencil::default()
        }
    } else {
        back
    };
    let plus = if i == n {
        // v_{n+1} = v_{n-1} + 2 h s
        Stencil {
            lower: 1.0 / h,
            diag: -1.0 / h,
            constant: 2.0 * s,
            ..Stencil::default()
        }
    } else {
        fwd
    };
    (minus, plus)
}

/// Godunov flux `max(H(max(p_-, 0)), H(min(p_+, 0)))` for `H(p) = |p|^m / m`.
pub fn godunov_hamiltonian(exponent: &Exponent, p_minus: f64, p_plus: f64) -> f64 {
    let a = exponent.hamiltonian(p_minus.max(0.0));
    let b = exponent.hamiltonian(p_plus.min(0.0));
    a.max(b)
}

/// Rouy-Tourin gradient magnitude `max(max(p_-, 0), -min(p_+, 0))`.
pub fn rouy_tourin(p_minus: f64, p_plus: f64) -> f64 {
    p_minus.max(0.0).max(-p_plus.min(0.0))
}

/// Zeroth-order term of an operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ZerothOrder {
    /// `delta v_i`.
    Discount(f64),
    /// The unknown constant `lambda`.
    Ergodic,
}

/// Value and derivatives of one residual row.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RowEval {
    pub value: f64,
    pub lower: f64,
    pub diag: f64,
    pub upper: f64,
    /// Derivative with respect to `lambda`.
    pub d_lambda: f64,
}

/// Tridiagonal Jacobian plus the `lambda` column and the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub lambda_col: Vec<f64>,
    pub residual: Vec<f64>,
}

/// An assembled residual map `v ↦ F(v)` (or `(v, lambda) ↦ F`).
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    mesh: Mesh,
    exponent: Exponent,
    bc: BoundaryCondition,
    zeroth: ZerothOrder,
    forcing: Vec<f64>,
    lap: Vec<Stencil>,
    minus: Vec<Stencil>,
    plus: Vec<Stencil>,
}

fn check_spec(mesh: &Mesh, spec: &ProblemSpec) -> Result<()> {
    if mesh.geometry != spec.geometry || mesh.dim != spec.dim {
        return Err(Error::domain(format!(
            "mesh ({:?}, N = {}) does not match problem ({:?}, N = {})",
            mesh.geometry, mesh.dim, spec.geometry, spec.dim
        )));
    }
    Ok(())
}

fn assemble(
    mesh: &Mesh,
    spec: &ProblemSpec,
    zeroth: ZerothOrder,
    bc: BoundaryCondition,
) -> Result<DiscreteOperator> {
    check_spec(mesh, spec)?;
    if let ZerothOrder::Discount(d) = zeroth {
        if !(d > 0.0) {
            return Err(Error::domain(format!("discount must be positive (got {d})")));
        }
    }
    let nodes = mesh.n_nodes();
    let lap = (0..nodes).map(|i| laplacian_row(mesh, bc, i)).collect();
    let (minus, plus) = (0..nodes).map(|i| difference_rows(mesh, bc, i)).unzip();
    let forcing = (0..nodes).map(|i| spec.forcing(mesh.node(i))).collect();
    Ok(DiscreteOperator {
        mesh: mesh.clone(),
        exponent: spec.exponent,
        bc,
        zeroth,
        forcing,
        lap,
        minus,
        plus,
    })
}

/// `delta v - Δv + H_G(Dv) - beta f = 0` for finite `m`.
pub fn assemble_discounted(
    mesh: &Mesh,
    spec: &ProblemSpec,
    delta: f64,
    bc: BoundaryCondition,
) -> Result<DiscreteOperator> {
    if spec.exponent.is_infinite() {
        return Err(Error::domain(
            "m = inf uses assemble_constrained for the discounted problem",
        ));
    }
    assemble(mesh, spec, ZerothOrder::Discount(delta), bc)
}

/// `max{delta v - Δv - beta f, |Dv|_G - 1} = 0` for `m = inf`.
pub fn assemble_constrained(
    mesh: &Mesh,
    spec: &ProblemSpec,
    delta: f64,
    bc: BoundaryCondition,
) -> Result<DiscreteOperator> {
    if !spec.exponent.is_infinite() {
        return Err(Error::domain("assemble_constrained needs m = inf"));
    }
    assemble(mesh, spec, ZerothOrder::Discount(delta), bc)
}

/// Ergodic operator with `lambda` as an extra unknown, for any exponent.
pub fn assemble_ergodic(
    mesh: &Mesh,
    spec: &ProblemSpec,
    bc: BoundaryCondition,
) -> Result<DiscreteOperator> {
    assemble(mesh, spec, ZerothOrder::Ergodic, bc)
}

impl DiscreteOperator {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn exponent(&self) -> &Exponent {
        &self.exponent
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn zeroth_order(&self) -> ZerothOrder {
        self.zeroth
    }

    /// Forcing `beta f + shift` sampled at the nodes.
    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    /// `(p_-, p_+)` at node `i`.
    pub fn differences(&self, v: &[f64], i: usize) -> (f64, f64) {
        (self.minus[i].apply(v, i), self.plus[i].apply(v, i))
    }

    /// Rouy-Tourin gradient magnitude at every node.
    pub fn gradient_magnitude(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|i| {
                let (pm, pp) = self.differences(v, i);
                rouy_tourin(pm, pp)
            })
            .collect()
    }

    fn is_pinned(&self, i: usize) -> bool {
        self.bc == BoundaryCondition::DirichletZero
            && (i == self.mesh.n_cells
                || (i == 0 && self.mesh.geometry == Geometry::Line))
    }

    /// Residual row `i` and its derivatives. Off-diagonal derivatives are
    /// nonpositive (monotonicity).
    pub fn row(&self, v: &[f64], lambda: f64, i: usize) -> RowEval {
        if self.is_pinned(i) {
            return RowEval {
                value: v[i],
                diag: 1.0,
                ..RowEval::default()
            };
        }
        let lap = &self.lap[i];
        let (zeroth, dz, d_lambda) = match self.zeroth {
            ZerothOrder::Discount(d) => (d * v[i], d, 0.0),
            ZerothOrder::Ergodic => (lambda, 0.0, 1.0),
        };
        let pde_value = zeroth - lap.apply(v, i) - self.forcing[i];
        let pde = RowEval {
            value: pde_value,
            lower: -lap.lower,
            diag: dz - lap.diag,
            upper: -lap.upper,
            d_lambda,
        };
        let (sm, sp) = (&self.minus[i], &self.plus[i]);
        let pm = sm.apply(v, i);
        let pp = sp.apply(v, i);
        match self.exponent.m() {
            Some(_) => {
                let a = pm.max(0.0);
                let b = pp.min(0.0);
                let ha = self.exponent.hamiltonian(a);
                let hb = self.exponent.hamiltonian(b);
                let (h, grad) = if ha >= hb {
                    (ha, sm.scaled(self.exponent.hamiltonian_derivative(a)))
                } else {
                    (hb, sp.scaled(self.exponent.hamiltonian_derivative(b)))
                };
                RowEval {
                    value: pde.value + h,
                    lower: pde.lower + grad.lower,
                    diag: pde.diag + grad.diag,
                    upper: pde.upper + grad.upper,
                    d_lambda,
                }
            }
            None => {
                let a = pm.max(0.0);
                let b = -pp.min(0.0);
                let g = a.max(b);
                let constraint = g - 1.0;
                // Ties and a flat gradient keep the PDE branch.
                if constraint <= pde.value || g == 0.0 {
                    return if constraint > pde.value {
                        RowEval {
                            value: constraint,
                            ..pde
                        }
                    } else {
                        pde
                    };
                }
                let grad = if a >= b { *sm } else { sp.scaled(-1.0) };
                RowEval {
                    value: constraint,
                    lower: grad.lower,
                    diag: grad.diag,
                    upper: grad.upper,
                    d_lambda: 0.0,
                }
            }
        }
    }

    /// `F(v)` for discounted operators, `F(v, lambda)` for ergodic ones.
    pub fn residual(&self, v: &[f64], lambda: f64) -> Vec<f64> {
        (0..v.len()).map(|i| self.row(v, lambda, i).value).collect()
    }

    /// Generalized Jacobian at `(v, lambda)`.
    pub fn linearize(&self, v: &[f64], lambda: f64) -> Linearization {
        let n = v.len();
        let mut out = Linearization {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            lambda_col: vec![0.0; n],
            residual: vec![0.0; n],
        };
        for i in 0..n {
            let r = self.row(v, lambda, i);
            out.lower[i] = r.lower;
            out.diag[i] = r.diag;
            out.upper[i] = r.upper;
            out.lambda_col[i] = r.d_lambda;
            out.residual[i] = r.value;
        }
        out
    }
}
