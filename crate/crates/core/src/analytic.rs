//! Closed-form subsolutions, thresholds and upper bounds.
//!
//! Everything here is exact up to quadrature and is used as an oracle for
//! the numerical pipeline.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::model::{japanese, Exponent, Potential};
use crate::quadrature::{self, ATOL};

/// Smooth radial subsolution `u = (K/alpha) <x>^alpha` certifying a zero
/// eigenvalue for `|beta| <= beta0` when `|f| <= C0 <x>^{-m*}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Be0Certificate {
    pub dim: usize,
    pub exponent: Exponent,
    pub c0: f64,
    /// `(N - m*)^{1/(m-1)}`.
    pub k_m: f64,
    /// `(N - m*)^{m*} / (m* C0)`.
    pub beta0: f64,
}

impl Be0Certificate {
    /// `<x>^{-m*} (|beta| C0 - (N - m*)^{m*} / m*)`, the pointwise slack.
    pub fn residual_margin(&self, beta: f64, r: f64) -> f64 {
        let ms = self.exponent.m_star();
        let n = self.dim as f64;
        japanese(r).powf(-ms) * (beta.abs() * self.c0 - (n - ms).powf(ms) / ms)
    }
}

pub fn be0_certificate(dim: usize, exponent: Exponent, c0: f64) -> Result<Be0Certificate> {
    let m = exponent
        .m()
        .ok_or_else(|| Error::domain("the smooth subsolution needs a finite exponent"))?;
    if !(c0 > 0.0) {
        return Err(Error::domain(format!("C0 must be positive (got {c0})")));
    }
    let ms = exponent.m_star();
    let n = dim as f64;
    if n <= ms {
        return Err(Error::domain(format!(
            "subsolution requires N > m* (N = {dim}, m* = {ms})"
        )));
    }
    Ok(Be0Certificate {
        dim,
        exponent,
        c0,
        k_m: (n - ms).powf(1.0 / (m - 1.0)),
        beta0: (n - ms).powf(ms) / (ms * c0),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsolutionValue {
    pub u: f64,
    pub du: Vec<f64>,
    pub laplacian: f64,
}

/// `u`, `Du` and `Δu` of the certificate's subsolution at a point of `R^N`.
/// Shorter points are padded with zeros.
pub fn be0_subsolution_eval(cert: &Be0Certificate, x: &[f64]) -> SubsolutionValue {
    let ms = cert.exponent.m_star();
    let alpha = cert.exponent.alpha();
    let k = cert.k_m;
    let n = cert.dim as f64;
    let r2: f64 = x.iter().map(|c| c * c).sum();
    let br = (1.0 + r2).sqrt();
    let w = br.powf(-ms);
    let mut du: Vec<f64> = x.iter().map(|c| k * w * c).collect();
    du.resize(cert.dim.max(x.len()), 0.0);
    SubsolutionValue {
        u: k / alpha * br.powf(alpha),
        du,
        laplacian: k * n * w - k * ms * br.powf(-ms - 2.0) * r2,
    }
}

/// Radial version of [`be0_subsolution_eval`]: `(u, |Du|, Δu)` at radius `r`.
fn be0_radial(cert: &Be0Certificate, r: f64) -> (f64, f64, f64) {
    let v = be0_subsolution_eval(cert, &[r]);
    (v.u, v.du[0].abs(), v.laplacian)
}

/// `max_x {-Δu + |Du|^m/m - beta f}` over radii `sample_radii`: the
/// subsolution residual with zero eigenvalue. Nonpositive certifies
/// `lambda = 0`.
pub fn be0_residual(
    cert: &Be0Certificate,
    beta: f64,
    potential: &Potential,
    sample_radii: &[f64],
) -> f64 {
    let m = cert.exponent.m().expect("certificate exponent is finite");
    exec::max_range(Execution::default(), sample_radii.len(), |i| {
        let r = sample_radii[i];
        let (_, g, lap) = be0_radial(cert, r);
        -lap + g.powf(m) / m - beta * potential.eval(r)
    })
}

/// Quantities attached to a potential on the line: the mass of its negative
/// part and the largest mass of `-f` over an interval.
#[derive(Debug, Clone, Serialize)]
pub struct PropLData {
    /// `∫ f_-`; `+inf` when the tails diverge.
    pub l: f64,
    /// `max G - min G` with `G(x) = ∫_0^x -f`; `+inf` when unbounded.
    pub k_bound: f64,
    /// Slope making the construction's derivative tend to `±1` at `±inf`.
    pub c_slope: f64,
    /// `∫_{-inf}^0 f_-`.
    pub l_left: f64,
    /// `∫_0^inf f_-`.
    pub l_right: f64,
    /// Tabulated `F(y) = ∫_0^y f_-`.
    pub f_nodes: Vec<f64>,
    pub f_values: Vec<f64>,
    #[serde(skip)]
    potential: Potential,
}

impl PropLData {
    /// `F(y) = ∫_0^y f_-`, evaluated by quadrature.
    pub fn big_f(&self, y: f64) -> f64 {
        let p = &self.potential;
        quadrature::integrate(|t| (-p.eval(t)).max(0.0), 0.0, y, ATOL)
            .expect("finite integrand")
    }

    /// `(2/L, 2/K)`: lower and upper bounds on the positive threshold.
    pub fn beta_plus_bounds(&self) -> (f64, f64) {
        (bound_from_mass(self.l), bound_from_mass(self.k_bound))
    }
}

fn bound_from_mass(mass: f64) -> f64 {
    if mass == 0.0 {
        f64::INFINITY
    } else if mass.is_infinite() {
        0.0
    } else {
        2.0 / mass
    }
}

fn negative_part(p: &Potential) -> impl Fn(f64) -> f64 + '_ {
    move |x| (-p.eval(x)).max(0.0)
}

pub fn propl_data(
    potential: &Potential,
    quadrature_radius: f64,
    quadrature_n: usize,
) -> Result<PropLData> {
    if !(quadrature_radius > 0.0) || quadrature_n < 2 {
        return Err(Error::domain(
            "propl_data needs a positive radius and at least two nodes",
        ));
    }
    let fm = negative_part(potential);
    let l_right = quadrature::integrate_to_infinity(&fm, 0.0, ATOL)?;
    let l_left = quadrature::integrate_from_neg_infinity(&fm, 0.0, ATOL)?;
    let (l, l_left, l_right, c_slope) = match (l_left, l_right) {
        (Some(a), Some(b)) => {
            let l = a + b;
            let c = if l > 0.0 { (a - b) / l } else { 0.0 };
            (l, a, b, c)
        }
        (a, b) => (
            f64::INFINITY,
            a.unwrap_or(f64::INFINITY),
            b.unwrap_or(f64::INFINITY),
            0.0,
        ),
    };

    // Cumulative integrals of f_- and of -f on a symmetric grid.
    let n = quadrature_n;
    let h = 2.0 * quadrature_radius / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|i| -quadrature_radius + i as f64 * h).collect();
    let cell_tol = ATOL / n as f64;
    let cells: Vec<(f64, f64)> = exec::map_range(Execution::default(), n - 1, |i| {
        let (a, b) = (nodes[i], nodes[i + 1]);
        let fneg = quadrature::integrate(&fm, a, b, cell_tol).unwrap_or(f64::NAN);
        let mf = quadrature::integrate(|x| -potential.eval(x), a, b, cell_tol).unwrap_or(f64::NAN);
        (fneg, mf)
    });
    let origin = nodes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let offset_f = quadrature::integrate(&fm, 0.0, nodes[origin], ATOL)?;
    let offset_g = quadrature::integrate(|x| -potential.eval(x), 0.0, nodes[origin], ATOL)?;
    let mut f_values = vec![0.0; n];
    let mut g_values = vec![0.0; n];
    f_values[origin] = offset_f;
    g_values[origin] = offset_g;
    for i in origin + 1..n {
        f_values[i] = f_values[i - 1] + cells[i - 1].0;
        g_values[i] = g_values[i - 1] + cells[i - 1].1;
    }
    for i in (0..origin).rev() {
        f_values[i] = f_values[i + 1] - cells[i].0;
        g_values[i] = g_values[i + 1] - cells[i].1;
    }
    if g_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("cumulative integral is not finite".into()));
    }

    // Extend G to ±inf with the tail integrals; a divergent tail makes the
    // range unbounded.
    let minus_f = |x: f64| -potential.eval(x);
    let tail_right = quadrature::integrate_to_infinity(minus_f, quadrature_radius, ATOL)?;
    let tail_left = quadrature::integrate_from_neg_infinity(minus_f, -quadrature_radius, ATOL)?;
    let k_bound = match (tail_left, tail_right) {
        (Some(tl), Some(tr)) => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &g in g_values
                .iter()
                .chain([g_values[0] - tl, g_values[n - 1] + tr].iter())
            {
                lo = lo.min(g);
                hi = hi.max(g);
            }
            hi - lo
        }
        _ => f64::INFINITY,
    };

    Ok(PropLData {
        l,
        k_bound,
        c_slope,
        l_left,
        l_right,
        f_nodes: nodes,
        f_values,
        potential: potential.clone(),
    })
}

/// Value and first two derivatives of a profile at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jet {
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
}

/// `u(x) = (2/L) ∫_0^x F + C x`, a subsolution of the constrained problem
/// with zero eigenvalue at coupling `2/L`.
pub fn propl_construction(data: &PropLData, x: f64) -> Result<Jet> {
    if !(data.l > 0.0 && data.l.is_finite()) {
        return Err(Error::domain(format!(
            "construction needs 0 < L < inf (got L = {})",
            data.l
        )));
    }
    let b = 2.0 / data.l;
    let fm = negative_part(&data.potential);
    // ∫_0^x F(y) dy = ∫_0^x (x - t) f_-(t) dt.
    let int_f = quadrature::integrate(|t| (x - t) * fm(t), 0.0, x, ATOL)?;
    Ok(Jet {
        u: b * int_f + data.c_slope * x,
        du: b * data.big_f(x) + data.c_slope,
        d2u: b * fm(x),
    })
}

/// `2 / ∫|f|` for a nonpositive potential; zero when `f` is not integrable.
pub fn exact_beta_plus_nonpositive_f(potential: &Potential, sample_radius: f64) -> Result<f64> {
    if potential.sign_profile(sample_radius).has_positive_part {
        return Err(Error::domain("potential has a positive part"));
    }
    match quadrature::integrate_line(|x| potential.eval(x).abs(), ATOL)? {
        None => Ok(0.0),
        Some(mass) if mass > 0.0 => Ok(2.0 / mass),
        Some(_) => Ok(f64::INFINITY),
    }
}

/// Member `C` of the one-parameter family of exact solutions of the
/// constrained problem with `f = -(1 - |x|)_+` and zero eigenvalue.
pub fn multi_solution_family(c: f64, x: f64) -> Result<Jet> {
    if !(-0.5..=0.5).contains(&c) {
        return Err(Error::domain(format!(
            "family parameter must lie in [-1/2, 1/2] (got {c})"
        )));
    }
    let a = x.abs();
    let s = x.signum();
    let (int_f, big_f) = if a <= 1.0 {
        (a * a / 2.0 - a * a * a / 6.0, s * (a - a * a / 2.0))
    } else {
        (1.0 / 3.0 + (a - 1.0) / 2.0, s * 0.5)
    };
    Ok(Jet {
        u: int_f + c * x,
        du: big_f + c,
        d2u: (1.0 - a).max(0.0),
    })
}

/// Compactly supported radial test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TestFunction {
    /// `exp(-1 / (1 - (r/radius)^2))` on `r < radius`.
    Bump { radius: f64 },
}

impl Default for TestFunction {
    fn default() -> Self {
        TestFunction::Bump { radius: 1.0 }
    }
}

impl TestFunction {
    pub fn radius(&self) -> f64 {
        match *self {
            TestFunction::Bump { radius } => radius,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let TestFunction::Bump { radius } = *self;
        let s = r / radius;
        let q = 1.0 - s * s;
        if q <= 0.0 {
            0.0
        } else {
            (-1.0 / q).exp()
        }
    }

    /// `|dη/dr|`.
    pub fn slope(&self, r: f64) -> f64 {
        let TestFunction::Bump { radius } = *self;
        let s = r.abs() / radius;
        let q = 1.0 - s * s;
        if q <= 0.0 {
            0.0
        } else {
            (-1.0 / q).exp() * 2.0 * s / (radius * q * q)
        }
    }
}

/// `∫_{R^N} w(x) g(x) dx` for radial `w` supported in the test-function
/// ball; `g` is evaluated at the signed abscissa in 1D and the radius
/// otherwise.
fn ball_integral<G: Fn(f64) -> f64>(dim: usize, radius: f64, g: G) -> Result<f64> {
    if dim == 1 {
        quadrature::integrate(g, -radius, radius, ATOL)
    } else {
        let w = quadrature::sphere_area(dim);
        let p = dim as i32 - 1;
        quadrature::integrate(|r| g(r) * r.powi(p), 0.0, radius, ATOL).map(|v| w * v)
    }
}

/// `(∫ η^{m*}, ∫ |Dη|^{m*})`.
fn test_function_moments(eta: &TestFunction, exponent: &Exponent, dim: usize) -> Result<(f64, f64)> {
    let ms = exponent.m_star();
    let mass = ball_integral(dim, eta.radius(), |x| eta.eval(x.abs()).powf(ms))?;
    let energy = ball_integral(dim, eta.radius(), |x| eta.slope(x.abs()).powf(ms))?;
    if !(mass > 0.0) || !energy.is_finite() {
        return Err(Error::Quadrature("test function is not integrable".into()));
    }
    Ok((mass, energy))
}

/// Upper bound on the eigenvalue of the problem with forcing `g`:
///
/// `eps + ∫ (g(y/δ) - eps)_+ η^{m*} + (δ^{m*}/m*) ∫ |Dη|^{m*}`
///
/// with `η` renormalized to `∫ η^{m*} = 1`.
pub fn mg_upper_bound(
    forcing: &Potential,
    eta: &TestFunction,
    delta: f64,
    epsilon: f64,
    exponent: &Exponent,
    dim: usize,
) -> Result<f64> {
    if !(delta > 0.0 && epsilon > 0.0) {
        return Err(Error::domain("mg bound needs delta > 0 and epsilon > 0"));
    }
    let ms = exponent.m_star();
    let (mass, energy) = test_function_moments(eta, exponent, dim)?;
    let excess = ball_integral(dim, eta.radius(), |y| {
        (forcing.eval(y / delta) - epsilon).max(0.0) * eta.eval(y.abs()).powf(ms)
    })?;
    Ok(epsilon + excess / mass + delta.powf(ms) / ms * energy / mass)
}

/// `-beta ∫ f_- η^{m*} + (1/m*) ∫ |Dη|^{m*}` with `η` renormalized.
pub fn mg_variant_bound(
    potential: &Potential,
    beta: f64,
    eta: &TestFunction,
    exponent: &Exponent,
    dim: usize,
) -> Result<f64> {
    let ms = exponent.m_star();
    let (mass, energy) = test_function_moments(eta, exponent, dim)?;
    let neg = ball_integral(dim, eta.radius(), |y| {
        (-potential.eval(y)).max(0.0) * eta.eval(y.abs()).powf(ms)
    })?;
    Ok(-beta * neg / mass + energy / (ms * mass))
}
