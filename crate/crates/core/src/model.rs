//! Shared domain types: exponents, potentials, problem instances and the
//! containers the solvers hand back.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Sign threshold used when classifying a sampled potential.
pub const SIGN_THRESHOLD: f64 = 1e-12;

/// Relative size of `|f|` at the truncation boundary that still counts as
/// negligible, in units of `C0`.
pub const BOUNDARY_NEGLIGIBLE: f64 = 1e-10;

/// `<x> = sqrt(1 + |x|^2)`.
#[inline]
pub fn japanese(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ExponentKind {
    Finite(f64),
    Infinite,
}

/// Power `m` of the gradient nonlinearity together with its conjugate
/// `m* = m/(m-1)` and the Hölder exponent `alpha = (m-2)/(m-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponent {
    kind: ExponentKind,
    m_star: f64,
    alpha: f64,
}

impl Exponent {
    pub fn new(kind: ExponentKind) -> Result<Self> {
        match kind {
            ExponentKind::Finite(m) => Self::finite(m),
            ExponentKind::Infinite => Ok(Self::infinite()),
        }
    }

    pub fn finite(m: f64) -> Result<Self> {
        if !m.is_finite() || m <= 2.0 {
            return Err(Error::domain(format!(
                "exponent must satisfy m > 2 (got m = {m})"
            )));
        }
        Ok(Exponent {
            kind: ExponentKind::Finite(m),
            m_star: m / (m - 1.0),
            alpha: (m - 2.0) / (m - 1.0),
        })
    }

    pub fn infinite() -> Self {
        Exponent {
            kind: ExponentKind::Infinite,
            m_star: 1.0,
            alpha: 1.0,
        }
    }

    pub fn kind(&self) -> ExponentKind {
        self.kind
    }

    /// `Some(m)` for finite exponents.
    pub fn m(&self) -> Option<f64> {
        match self.kind {
            ExponentKind::Finite(m) => Some(m),
            ExponentKind::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.kind, ExponentKind::Infinite)
    }

    pub fn m_star(&self) -> f64 {
        self.m_star
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `H(p) = |p|^m / m`; infinite exponents have no Hamiltonian.
    pub fn hamiltonian(&self, p: f64) -> f64 {
        let m = self.m().expect("hamiltonian of m = inf");
        p.abs().powf(m) / m
    }

    /// `H'(p) = |p|^(m-2) p`.
    pub fn hamiltonian_derivative(&self, p: f64) -> f64 {
        let m = self.m().expect("hamiltonian of m = inf");
        p.abs().powf(m - 1.0) * p.signum()
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ExponentKind::Finite(m) => write!(f, "{m}"),
            ExponentKind::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "+inf") {
            return Ok(Exponent::infinite());
        }
        let m: f64 = t
            .parse()
            .map_err(|_| Error::domain(format!("cannot parse exponent '{s}'")))?;
        Exponent::finite(m)
    }
}

/// Analytic profile of a potential. Profiles are functions of a single
/// coordinate: the signed abscissa on the line, or the radius for radial
/// problems in any dimension.
#[derive(Clone)]
pub enum Profile {
    Zero,
    /// Constant forcing; violates the decay assumption and exists for tests.
    Constant(f64),
    /// `amplitude * (1 - |x - center| / width)_+`.
    Bump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `amplitude * exp(-rate |x|)`.
    Exponential { amplitude: f64, rate: f64 },
    /// `amplitude * <x>^(-power)`.
    Algebraic { amplitude: f64, power: f64 },
    /// `amplitude * exp(-|x - center|^2 / width^2)`.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    Scaled(f64, Box<Profile>),
    Sum(Vec<Profile>),
    Custom {
        name: String,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant(c) => *c,
            Profile::Bump {
                amplitude,
                center,
                width,
            } => amplitude * (1.0 - (x - center).abs() / width).max(0.0),
            Profile::Exponential { amplitude, rate } => amplitude * (-rate * x.abs()).exp(),
            Profile::Algebraic { amplitude, power } => amplitude * japanese(x).powf(-power),
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let z = (x - center) / width;
                amplitude * (-z * z).exp()
            }
            Profile::Scaled(s, p) => s * p.eval(x),
            Profile::Sum(ps) => ps.iter().map(|p| p.eval(x)).sum(),
            Profile::Custom { eval, .. } => eval(x),
        }
    }

    /// Radius beyond which the profile vanishes identically, if known.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Profile::Zero => Some(0.0),
            Profile::Bump { center, width, .. } => Some(center.abs() + width.abs()),
            Profile::Scaled(_, p) => p.support_radius(),
            Profile::Sum(ps) => ps
                .iter()
                .map(|p| p.support_radius())
                .try_fold(0.0_f64, |acc, r| r.map(|r| acc.max(r))),
            _ => None,
        }
    }

    /// Whether `f(x) = f(-x)` holds by construction.
    pub fn is_even(&self) -> bool {
        match self {
            Profile::Zero | Profile::Constant(_) => true,
            Profile::Bump { center, .. } | Profile::Gaussian { center, .. } => *center == 0.0,
            Profile::Exponential { .. } | Profile::Algebraic { .. } => true,
            Profile::Scaled(_, p) => p.is_even(),
            Profile::Sum(ps) => ps.iter().all(Profile::is_even),
            Profile::Custom { .. } => false,
        }
    }

    fn label(&self) -> String {
        match self {
            Profile::Zero => "zero".into(),
            Profile::Constant(c) => format!("constant({c})"),
            Profile::Bump {
                amplitude,
                center,
                width,
            } => format!("bump(a={amplitude},c={center},w={width})"),
            Profile::Exponential { amplitude, rate } => format!("exp(a={amplitude},k={rate})"),
            Profile::Algebraic { amplitude, power } => format!("algebraic(a={amplitude},q={power})"),
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => format!("gauss(a={amplitude},c={center},w={width})"),
            Profile::Scaled(s, p) => format!("{s}*{}", p.label()),
            Profile::Sum(ps) => ps.iter().map(Profile::label).collect::<Vec<_>>().join("+"),
            Profile::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A potential `f` together with its decay certificate `C0`.
#[derive(Clone, Debug)]
pub struct Potential {
    profile: Profile,
    c0: Option<f64>,
    support_hint: Option<f64>,
}

impl Potential {
    pub fn new(profile: Profile) -> Self {
        let support_hint = profile.support_radius();
        Potential {
            profile,
            c0: None,
            support_hint,
        }
    }

    /// `-(1 - |x|)_+`.
    pub fn bump() -> Self {
        Potential::new(Profile::Bump {
            amplitude: -1.0,
            center: 0.0,
            width: 1.0,
        })
        .with_c0(1.0)
    }

    /// `-exp(-|x|)`.
    pub fn exponential_well() -> Self {
        Potential::new(Profile::Exponential {
            amplitude: -1.0,
            rate: 1.0,
        })
        .with_c0(1.0)
    }

    /// `amplitude * <x>^(-power)`, certified with `C0 = |amplitude|`
    /// (valid whenever `power >= m*`).
    pub fn algebraic(amplitude: f64, power: f64) -> Self {
        Potential::new(Profile::Algebraic { amplitude, power }).with_c0(amplitude.abs())
    }

    pub fn zero() -> Self {
        Potential::new(Profile::Zero)
    }

    pub fn constant(c: f64) -> Self {
        Potential::new(Profile::Constant(c))
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = Some(c0);
        self
    }

    pub fn with_support_hint(mut self, radius: f64) -> Self {
        self.support_hint = Some(radius);
        self
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn support_hint(&self) -> Option<f64> {
        self.support_hint
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.profile.eval(x)
    }

    /// Evaluates a radial potential at a point of `R^N`.
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        if x.len() == 1 {
            return self.eval(x[0]);
        }
        self.eval(x.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    /// `-f`, keeping the certificate.
    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Potential {
            profile: Profile::Scaled(s, Box::new(self.profile.clone())),
            c0: self.c0.map(|c| c * s.abs()),
            support_hint: self.support_hint,
        }
    }

    /// `self + other`; certificates add.
    pub fn plus(&self, other: &Potential) -> Self {
        Potential {
            profile: Profile::Sum(vec![self.profile.clone(), other.profile.clone()]),
            c0: match (self.c0, other.c0) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            },
            support_hint: match (self.support_hint, other.support_hint) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            },
        }
    }

    /// `(1 - t) self + t other`.
    pub fn mix(&self, other: &Potential, t: f64) -> Self {
        self.scaled(1.0 - t).plus(&other.scaled(t))
    }

    /// Decay constant for the given exponent: the stored certificate if any,
    /// else the sampled maximum of `|f| <x>^{m*}` on `[-R, R]`.
    pub fn decay_constant(&self, exponent: &Exponent, sample_radius: f64) -> f64 {
        if let Some(c0) = self.c0 {
            return c0;
        }
        let ms = exponent.m_star();
        let n = 20_000;
        (0..=n)
            .map(|i| -sample_radius + 2.0 * sample_radius * i as f64 / n as f64)
            .map(|x| self.eval(x).abs() * japanese(x).powf(ms))
            .fold(0.0, f64::max)
    }

    /// Dense-sampling classification of the positive and negative parts.
    pub fn sign_profile(&self, sample_radius: f64) -> SignProfile {
        let n = 200_000;
        let mut out = SignProfile {
            has_negative_part: false,
            has_positive_part: false,
        };
        for i in 0..=n {
            let x = -sample_radius + 2.0 * sample_radius * i as f64 / n as f64;
            let v = self.eval(x);
            out.has_negative_part |= v < -SIGN_THRESHOLD;
            out.has_positive_part |= v > SIGN_THRESHOLD;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignProfile {
    pub has_negative_part: bool,
    pub has_positive_part: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PotentialViolation {
    /// No sample exceeds the sign threshold.
    IdenticallyZero,
    /// `|f| <x>^{m*} > C0` at the recorded abscissa.
    DecayBound { x: f64, ratio: f64 },
    /// `|f|` at the sampling radius is not negligible.
    NotVanishing { radius: f64, value: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialReport {
    pub violations: Vec<PotentialViolation>,
    /// `max |f(x)| <x>^{m*} / C0` over the samples.
    pub max_ratio: f64,
    pub c0: f64,
}

impl PotentialReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `f` on `[-sample_radius, sample_radius]` and reports which of the
/// standing assumptions (continuity and vanishing at infinity, the decay
/// bound, `f != 0`) are visibly violated.
pub fn validate_potential(
    potential: &Potential,
    exponent: &Exponent,
    sample_radius: f64,
    n_samples: usize,
) -> Result<PotentialReport> {
    if sample_radius <= 0.0 || n_samples < 2 {
        return Err(Error::domain(
            "validate_potential needs sample_radius > 0 and n_samples >= 2",
        ));
    }
    let c0 = potential.decay_constant(exponent, sample_radius);
    let ms = exponent.m_star();
    let mut violations = Vec::new();
    let mut max_ratio: f64 = 0.0;
    let mut worst: Option<(f64, f64)> = None;
    let mut nonzero = false;
    for i in 0..n_samples {
        let x = -sample_radius + 2.0 * sample_radius * i as f64 / (n_samples - 1) as f64;
        let v = potential.eval(x).abs();
        nonzero |= v > SIGN_THRESHOLD;
        let ratio = if c0 > 0.0 {
            v * japanese(x).powf(ms) / c0
        } else if v > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > max_ratio {
            max_ratio = ratio;
        }
        if ratio > 1.0 + 1e-12 && worst.is_none_or(|(_, r)| ratio > r) {
            worst = Some((x, ratio));
        }
    }
    if !nonzero {
        violations.push(PotentialViolation::IdenticallyZero);
    }
    if let Some((x, ratio)) = worst {
        violations.push(PotentialViolation::DecayBound { x, ratio });
    }
    let edge = potential
        .eval(sample_radius)
        .abs()
        .max(potential.eval(-sample_radius).abs());
    if nonzero && edge > BOUNDARY_NEGLIGIBLE * c0.max(f64::MIN_POSITIVE) {
        violations.push(PotentialViolation::NotVanishing {
            radius: sample_radius,
            value: edge,
        });
    }
    Ok(PotentialReport {
        violations,
        max_ratio,
        c0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Geometry {
    /// The real line, truncated to `[-R, R]`; requires `N = 1`.
    Line,
    /// Radial profiles in `R^N`, truncated to `r in [0, R]`.
    Radial,
}

/// One ergodic problem instance:
/// `lambda - Δu + |Du|^m/m - beta f = 0` (finite m) or
/// `max{lambda - Δu - beta f, |Du| - 1} = 0` (m = inf), with `u(0) = 0`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dim: usize,
    pub exponent: Exponent,
    pub beta: f64,
    pub potential: Potential,
    pub geometry: Geometry,
    /// Constant added to the forcing `beta f`. Only the shift identity
    /// checks set this; it is also the far-field level of the forcing.
    pub shift: f64,
}

impl ProblemSpec {
    pub fn new(
        dim: usize,
        exponent: Exponent,
        beta: f64,
        potential: Potential,
        geometry: Geometry,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if geometry == Geometry::Line && dim != 1 {
            return Err(Error::domain("line geometry requires N = 1"));
        }
        Ok(ProblemSpec {
            dim,
            exponent,
            beta,
            potential,
            geometry,
            shift: 0.0,
        })
    }

    pub fn line(exponent: Exponent, beta: f64, potential: Potential) -> Self {
        Self::new(1, exponent, beta, potential, Geometry::Line).expect("valid line spec")
    }

    pub fn radial(dim: usize, exponent: Exponent, beta: f64, potential: Potential) -> Result<Self> {
        Self::new(dim, exponent, beta, potential, Geometry::Radial)
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        ProblemSpec {
            beta,
            ..self.clone()
        }
    }

    pub fn with_exponent(&self, exponent: Exponent) -> Self {
        ProblemSpec {
            exponent,
            ..self.clone()
        }
    }

    pub fn with_potential(&self, potential: Potential) -> Self {
        ProblemSpec {
            potential,
            ..self.clone()
        }
    }

    pub fn with_shift(&self, shift: f64) -> Self {
        ProblemSpec {
            shift,
            ..self.clone()
        }
    }

    /// Forcing term `beta f(x) + shift`.
    #[inline]
    pub fn forcing(&self, x: f64) -> f64 {
        self.beta * self.potential.eval(x) + self.shift
    }
}

/// Discrete profile on a uniform mesh, normalized so that the value at the
/// origin node is zero.
#[derive(Debug, Clone, Serialize)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
    h: f64,
    origin: usize,
}

impl GridFunction {
    /// Builds a grid function and shifts it so that `values[origin] == 0`.
    pub fn normalized(nodes: Vec<f64>, mut values: Vec<f64>, h: f64, origin: usize) -> Self {
        assert_eq!(nodes.len(), values.len(), "node/value length mismatch");
        assert!(origin < nodes.len());
        let c = values[origin];
        for v in &mut values {
            *v -= c;
        }
        GridFunction {
            nodes,
            values,
            h,
            origin,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn origin_index(&self) -> usize {
        self.origin
    }

    /// Value at the node nearest to `x`.
    pub fn value_near(&self, x: f64) -> f64 {
        let i = ((x - self.nodes[0]) / self.h).round();
        let i = (i.max(0.0) as usize).min(self.nodes.len() - 1);
        self.values[i]
    }

    /// Largest one-sided difference quotient in absolute value.
    pub fn max_slope(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| ((w[1] - w[0]) / self.h).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    DirectErgodic,
    VanishingDiscount,
    MSweepLimit,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::DirectErgodic => "direct",
            Method::VanishingDiscount => "discount",
            Method::MSweepLimit => "m-sweep-limit",
        })
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub radius: f64,
    pub n_cells: usize,
    /// Eigenvalue of the truncated problem before the `lambda <= shift` cap.
    pub truncated_lambda: f64,
    pub delta_sequence: Vec<f64>,
    /// `delta * v_delta(0)` for each discount.
    pub discount_values: Vec<f64>,
    pub fit_residual: Option<f64>,
    /// `|lambda_direct - lambda_discount|` when both methods ran.
    pub disagreement: Option<f64>,
    /// Residual tolerance the solver enforced.
    pub tolerance: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenEstimate {
    pub lambda: f64,
    pub method: Method,
    pub residual_inf_norm: f64,
    pub holder_seminorm: f64,
    pub diagnostics: Diagnostics,
}

/// Endpoints of the zero plateau `{beta : lambda(beta) = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaThresholds {
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub bracket_width: f64,
}
