//! Parameter sweeps: convergence in `m` and the zero plateau in `beta`.

use log::{debug, warn};
use serde::Serialize;

use crate::analytic::be0_certificate;
use crate::discretize::Mesh;
use crate::eigen::{self, default_delta_sequence, EigenSettings};
use crate::error::{Error, Result};
use crate::exec;
use crate::model::{BetaThresholds, EigenEstimate, Exponent, GridFunction, Potential, ProblemSpec};

/// How a zero eigenvalue is told apart from a negative one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionPolicy {
    /// Smallest `|lambda|` that counts as negative.
    pub floor: f64,
    /// Multiple of the cross-method disagreement added to the floor test.
    pub disagreement_factor: f64,
    /// Run both methods at every point to measure the disagreement.
    pub cross_check: bool,
}

impl Default for DetectionPolicy {
    fn default() -> Self {
        DetectionPolicy {
            floor: 1e-4,
            disagreement_factor: 10.0,
            cross_check: false,
        }
    }
}

impl DetectionPolicy {
    pub fn threshold(&self, disagreement: Option<f64>) -> f64 {
        self.floor
            .max(self.disagreement_factor * disagreement.unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub eigen: EigenSettings,
    pub detection: DetectionPolicy,
    pub deltas: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            eigen: EigenSettings::default(),
            detection: DetectionPolicy::default(),
            deltas: default_delta_sequence(),
        }
    }
}

/// One eigenvalue with the detection threshold that applies to it.
#[derive(Debug, Clone, Serialize)]
pub struct Classified {
    pub estimate: EigenEstimate,
    pub threshold: f64,
}

impl Classified {
    pub fn is_negative(&self) -> bool {
        self.estimate.lambda < -self.threshold
    }
}

/// Direct estimate (cross-checked when the policy asks for it) and its
/// detection threshold.
pub fn classify(mesh: &Mesh, spec: &ProblemSpec, s: &SweepSettings) -> Result<Classified> {
    let estimate = if s.detection.cross_check {
        eigen::cross_validate(mesh, spec, &s.deltas, &s.eigen)?
    } else {
        eigen::lambda_via_direct(mesh, spec, &s.eigen)?
    };
    let threshold = s.detection.threshold(estimate.diagnostics.disagreement);
    Ok(Classified {
        estimate,
        threshold,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MPoint {
    /// `+inf` for the constrained problem.
    pub m: f64,
    pub estimate: Option<EigenEstimate>,
    /// `|lambda_m - lambda_inf|`.
    pub gap: Option<f64>,
    /// `max |u_m - u_inf|` on the inner half of the domain.
    pub profile_distance: Option<f64>,
    /// `lambda_m >= lambda_inf - 1/m - slack`.
    pub lower_bound_holds: Option<bool>,
    pub error: Option<String>,
}

impl MPoint {
    pub fn lambda(&self) -> Option<f64> {
        self.estimate.as_ref().map(|e| e.lambda)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MSweepResult {
    pub points: Vec<MPoint>,
    pub infinity: Option<MPoint>,
    /// Large finite `m` kept as a consistency check on the `m = inf` solve.
    pub surrogate: Option<MPoint>,
    /// Final gap no larger than the first.
    pub gap_shrinks: bool,
    /// Gaps strictly decreasing along the sweep; reported only.
    pub gaps_monotone: bool,
    #[serde(skip)]
    pub profiles: Vec<(f64, GridFunction)>,
}

/// Slack in `lambda_m >= lambda_inf - 1/m - slack`.
pub const LOWER_BOUND_SLACK: f64 = 1e-3;
/// Finite surrogate for `m = inf`.
pub const SURROGATE_M: f64 = 256.0;

fn profile_distance(a: &GridFunction, b: &GridFunction, radius: f64) -> f64 {
    a.nodes()
        .iter()
        .zip(a.values().iter().zip(b.values()))
        .filter(|(x, _)| x.abs() <= radius)
        .fold(0.0_f64, |m, (_, (u, v))| m.max((u - v).abs()))
}

/// Solves `base` for every `m` in `m_list` and, optionally, for `m = inf`
/// and the surrogate, on the same mesh.
pub fn m_sweep(
    base: &ProblemSpec,
    mesh: &Mesh,
    m_list: &[f64],
    include_infinity: bool,
    s: &SweepSettings,
) -> Result<MSweepResult> {
    if m_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("m list must be increasing"));
    }
    let mut exponents = m_list
        .iter()
        .map(|&m| Exponent::finite(m))
        .collect::<Result<Vec<_>>>()?;
    let finite = exponents.len();
    if include_infinity {
        exponents.push(Exponent::finite(SURROGATE_M)?);
        exponents.push(Exponent::infinite());
    }
    let runs = exec::map(s.eigen.execution, &exponents, |e| {
        let spec = base.with_exponent(*e);
        eigen::direct_with_profile(mesh, &spec, &s.eigen)
    });

    let mut points = Vec::new();
    let mut profiles = Vec::new();
    for (e, run) in exponents.iter().zip(runs) {
        let m = e.m().unwrap_or(f64::INFINITY);
        match run {
            Ok((est, u)) => {
                profiles.push((m, u));
                points.push(MPoint {
                    m,
                    estimate: Some(est),
                    gap: None,
                    profile_distance: None,
                    lower_bound_holds: None,
                    error: None,
                });
            }
            Err(err) => {
                warn!("m = {e}: {err}");
                points.push(MPoint {
                    m,
                    estimate: None,
                    gap: None,
                    profile_distance: None,
                    lower_bound_holds: None,
                    error: Some(err.to_string()),
                });
            }
        }
    }

    let (infinity, surrogate) = if include_infinity {
        let inf = points.pop();
        (inf, points.pop())
    } else {
        (None, None)
    };
    let lambda_inf = infinity.as_ref().and_then(MPoint::lambda);
    let u_inf = profiles
        .iter()
        .find(|(m, _)| m.is_infinite())
        .map(|(_, u)| u.clone());
    let inner = mesh.radius() / 2.0;
    let fill = |p: &mut MPoint| {
        if let (Some(li), Some(lm)) = (lambda_inf, p.lambda()) {
            p.gap = Some((lm - li).abs());
            p.lower_bound_holds = Some(lm >= li - 1.0 / p.m - LOWER_BOUND_SLACK);
        }
        if let Some(ui) = &u_inf {
            if let Some((_, um)) = profiles.iter().find(|(m, _)| *m == p.m) {
                p.profile_distance = Some(profile_distance(um, ui, inner));
            }
        }
    };
    for p in points.iter_mut() {
        fill(p);
    }
    let mut surrogate = surrogate;
    if let Some(p) = surrogate.as_mut() {
        fill(p);
    }

    let gaps: Vec<f64> = points.iter().filter_map(|p| p.gap).collect();
    let gap_shrinks = gaps.len() == finite
        && finite > 0
        && gaps.last().copied().unwrap_or(f64::NAN) <= gaps[0];
    let gaps_monotone = gaps.len() == finite && gaps.windows(2).all(|w| w[1] < w[0]);
    Ok(MSweepResult {
        points,
        infinity,
        surrogate,
        gap_shrinks,
        gaps_monotone,
        profiles,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaPoint {
    pub beta: f64,
    pub estimate: Option<EigenEstimate>,
    pub threshold: f64,
    pub error: Option<String>,
}

impl BetaPoint {
    pub fn lambda(&self) -> Option<f64> {
        self.estimate.as_ref().map(|e| e.lambda)
    }

    fn on_plateau(&self) -> Option<bool> {
        self.lambda().map(|l| l >= -self.threshold)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaSweepResult {
    /// Sorted by `beta`.
    pub points: Vec<BetaPoint>,
    /// Grid endpoints `[lo, hi]` of the run of zero eigenvalues around the
    /// grid point nearest to `beta = 0`.
    pub plateau: Option<(f64, f64)>,
    /// Grid-resolution thresholds: infinite when the plateau reaches the
    /// end of the grid.
    pub thresholds: BetaThresholds,
}

impl BetaSweepResult {
    /// Largest violation of `lambda(b_i) >= interpolation of neighbours`.
    pub fn concavity_defect(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter_map(|p| p.lambda().map(|l| (p.beta, l)))
            .collect();
        pts.windows(3)
            .map(|w| {
                let (b0, l0) = w[0];
                let (b1, l1) = w[1];
                let (b2, l2) = w[2];
                let t = (b1 - b0) / (b2 - b0);
                ((1.0 - t) * l0 + t * l2 - l1).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Largest increase of `lambda` between consecutive nonnegative `beta`.
    pub fn monotonicity_defect_positive(&self) -> f64 {
        let pts: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.beta >= 0.0)
            .filter_map(BetaPoint::lambda)
            .collect();
        pts.windows(2)
            .map(|w| (w[1] - w[0]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `lambda` strictly decreasing on the grid points beyond `beta_+`.
    pub fn decreasing_beyond_plus(&self) -> bool {
        let hi = match self.plateau {
            Some((_, hi)) => hi,
            None => return false,
        };
        let tail: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.beta > hi)
            .filter_map(BetaPoint::lambda)
            .collect();
        tail.windows(2).all(|w| w[1] < w[0])
    }

    /// `lambda` strictly decreasing in `-beta` on grid points below `beta_-`.
    pub fn decreasing_beyond_minus(&self) -> bool {
        let lo = match self.plateau {
            Some((lo, _)) => lo,
            None => return false,
        };
        let tail: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.beta < lo)
            .filter_map(BetaPoint::lambda)
            .collect();
        tail.windows(2).all(|w| w[1] > w[0])
    }
}

/// Tabulates `lambda(beta)` on `betas` and locates the zero plateau.
pub fn beta_sweep(
    base: &ProblemSpec,
    mesh: &Mesh,
    betas: &[f64],
    s: &SweepSettings,
) -> Result<BetaSweepResult> {
    if betas.is_empty() {
        return Err(Error::domain("beta grid is empty"));
    }
    let mut grid = betas.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let runs = exec::map(s.eigen.execution, &grid, |&b| classify(mesh, &base.with_beta(b), s));
    let points: Vec<BetaPoint> = grid
        .iter()
        .zip(runs)
        .map(|(&beta, r)| match r {
            Ok(c) => BetaPoint {
                beta,
                threshold: c.threshold,
                estimate: Some(c.estimate),
                error: None,
            },
            Err(e) => BetaPoint {
                beta,
                estimate: None,
                threshold: s.detection.floor,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let centre = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.beta.abs().total_cmp(&b.1.beta.abs()))
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    let plateau = if points[centre].on_plateau() == Some(true) {
        let mut lo = centre;
        while lo > 0 && points[lo - 1].on_plateau() == Some(true) {
            lo -= 1;
        }
        let mut hi = centre;
        while hi + 1 < points.len() && points[hi + 1].on_plateau() == Some(true) {
            hi += 1;
        }
        Some((lo, hi))
    } else {
        None
    };
    let thresholds = match plateau {
        Some((lo, hi)) => {
            let last = points.len() - 1;
            let beta_plus = if hi == last {
                f64::INFINITY
            } else {
                points[hi].beta
            };
            let beta_minus = if lo == 0 {
                f64::NEG_INFINITY
            } else {
                points[lo].beta
            };
            let wp = if hi < last {
                points[hi + 1].beta - points[hi].beta
            } else {
                0.0
            };
            let wm = if lo > 0 {
                points[lo].beta - points[lo - 1].beta
            } else {
                0.0
            };
            BetaThresholds {
                beta_plus,
                beta_minus,
                bracket_width: wp.max(wm),
            }
        }
        None => BetaThresholds {
            beta_plus: 0.0,
            beta_minus: 0.0,
            bracket_width: 0.0,
        },
    };
    Ok(BetaSweepResult {
        plateau: plateau.map(|(lo, hi)| (points[lo].beta, points[hi].beta)),
        points,
        thresholds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Bisection {
    pub beta: f64,
    /// Final bracket `(zero side, negative side)`.
    pub bracket: (f64, f64),
    pub width: f64,
    pub evaluations: usize,
}

/// Maximum number of halvings.
pub const BISECTION_DEPTH: usize = 30;

/// Bisects the predicate `lambda(beta) < -threshold` inside
/// `(zero side, negative side)` until the bracket is narrower than
/// `tol_beta`.
pub fn bisect_beta_plus(
    base: &ProblemSpec,
    mesh: &Mesh,
    bracket: (f64, f64),
    tol_beta: f64,
    s: &SweepSettings,
) -> Result<Bisection> {
    let (mut lo, mut hi) = bracket;
    if !(hi > lo) {
        return Err(Error::InvalidBracket(format!(
            "negative side {hi} must exceed zero side {lo}"
        )));
    }
    let (a, b) = exec::join(
        s.eigen.execution,
        || classify(mesh, &base.with_beta(lo), s),
        || classify(mesh, &base.with_beta(hi), s),
    );
    let (a, b) = (a?, b?);
    if a.is_negative() {
        return Err(Error::InvalidBracket(format!(
            "lambda({lo}) = {:.3e} is below -{:.1e}",
            a.estimate.lambda, a.threshold
        )));
    }
    if !b.is_negative() {
        return Err(Error::InvalidBracket(format!(
            "lambda({hi}) = {:.3e} is not below -{:.1e}",
            b.estimate.lambda, b.threshold
        )));
    }
    let mut evaluations = 2;
    for _ in 0..BISECTION_DEPTH {
        if hi - lo <= tol_beta {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let c = classify(mesh, &base.with_beta(mid), s)?;
        evaluations += 1;
        debug!("bisect: beta = {mid:.8}, lambda = {:.3e}", c.estimate.lambda);
        if c.is_negative() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Bisection {
        beta: 0.5 * (lo + hi),
        bracket: (lo, hi),
        width: hi - lo,
        evaluations,
    })
}

/// `beta_-` via `(beta, f) -> (-beta, -f)`; `bracket` is
/// `(zero side, negative side)` with the negative side below.
pub fn bisect_beta_minus(
    base: &ProblemSpec,
    mesh: &Mesh,
    bracket: (f64, f64),
    tol_beta: f64,
    s: &SweepSettings,
) -> Result<Bisection> {
    let flipped = base.with_potential(base.potential.negated());
    let r = bisect_beta_plus(&flipped, mesh, (-bracket.0, -bracket.1), tol_beta, s)?;
    Ok(Bisection {
        beta: -r.beta,
        bracket: (-r.bracket.0, -r.bracket.1),
        ..r
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdEstimate {
    pub thresholds: BetaThresholds,
    pub plus: Option<Bisection>,
    pub minus: Option<Bisection>,
    pub notes: Vec<String>,
}

/// Default positive probes for bracketing a threshold.
pub fn default_probes() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
}

fn one_side(
    base: &ProblemSpec,
    mesh: &Mesh,
    probes: &[f64],
    tol_beta: f64,
    s: &SweepSettings,
    notes: &mut Vec<String>,
    side: &str,
) -> Result<(f64, Option<Bisection>)> {
    let runs = exec::map(s.eigen.execution, probes, |&b| classify(mesh, &base.with_beta(b), s));
    let mut first_negative = None;
    for (i, r) in runs.into_iter().enumerate() {
        if r?.is_negative() {
            first_negative = Some(i);
            break;
        }
    }
    match first_negative {
        Some(0) => {
            notes.push(format!(
                "{side}: lambda < 0 at every tested beta (smallest probe {}); reported as 0",
                probes[0]
            ));
            Ok((0.0, None))
        }
        Some(i) => {
            let b = bisect_beta_plus(base, mesh, (probes[i - 1], probes[i]), tol_beta, s)?;
            Ok((b.beta, Some(b)))
        }
        None => {
            notes.push(format!(
                "{side}: no negative eigenvalue up to beta = {}; reported as unbounded",
                probes.last().copied().unwrap_or(0.0)
            ));
            Ok((f64::INFINITY, None))
        }
    }
}

/// Both thresholds. A side whose part of `f` vanishes on the sampled
/// domain is infinite without solving.
pub fn estimate_thresholds(
    base: &ProblemSpec,
    mesh: &Mesh,
    probes: &[f64],
    tol_beta: f64,
    s: &SweepSettings,
) -> Result<ThresholdEstimate> {
    if probes.is_empty() || probes.windows(2).any(|w| !(w[1] > w[0])) || probes[0] <= 0.0 {
        return Err(Error::domain("probes must be positive and increasing"));
    }
    let signs = base.potential.sign_profile(mesh.radius());
    let mut notes = Vec::new();
    let (beta_plus, plus) = if signs.has_negative_part {
        one_side(base, mesh, probes, tol_beta, s, &mut notes, "beta_plus")?
    } else {
        (f64::INFINITY, None)
    };
    let (beta_minus, minus) = if signs.has_positive_part {
        let flipped = base.with_potential(base.potential.negated());
        let (b, bis) = one_side(&flipped, mesh, probes, tol_beta, s, &mut notes, "beta_minus")?;
        let bis = bis.map(|r| Bisection {
            beta: -r.beta,
            bracket: (-r.bracket.0, -r.bracket.1),
            ..r
        });
        (-b, bis)
    } else {
        (f64::NEG_INFINITY, None)
    };
    let bracket_width = plus
        .iter()
        .chain(minus.iter())
        .map(|b| b.width)
        .fold(0.0, f64::max);
    Ok(ThresholdEstimate {
        thresholds: BetaThresholds {
            beta_plus,
            beta_minus,
            bracket_width,
        },
        plus,
        minus,
        notes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Be0FloorRow {
    pub m: f64,
    pub beta: f64,
    pub lambda: Option<f64>,
    pub truncated_lambda: Option<f64>,
    pub passed: bool,
    pub error: Option<String>,
}

/// `lambda` at the certified coupling for `f = -C0 <x>^{-m*}`: `beta0(m)`
/// for finite `m`, `(N - 1) / (2 C0)` for `m = inf`.
pub fn be0_floor_check(
    dim: usize,
    exponents: &[Exponent],
    c0: f64,
    mesh: &Mesh,
    tol: f64,
    s: &SweepSettings,
) -> Result<Vec<Be0FloorRow>> {
    if dim < 2 {
        return Err(Error::domain("the coupling floor needs N >= 2"));
    }
    if mesh.dim() != dim {
        return Err(Error::domain("mesh dimension does not match N"));
    }
    let jobs = exponents
        .iter()
        .map(|e| {
            let beta = match e.m() {
                Some(_) => be0_certificate(dim, *e, c0)?.beta0,
                None => (dim as f64 - 1.0) / (2.0 * c0),
            };
            Ok((*e, beta))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = exec::map(s.eigen.execution, &jobs, |&(e, beta)| {
        let f = Potential::algebraic(-c0, e.m_star());
        let spec = ProblemSpec::radial(dim, e, beta, f)?;
        eigen::lambda_via_direct(mesh, &spec, &s.eigen)
    });
    Ok(jobs
        .iter()
        .zip(rows)
        .map(|(&(e, beta), r)| {
            let m = e.m().unwrap_or(f64::INFINITY);
            match r {
                Ok(est) => Be0FloorRow {
                    m,
                    beta,
                    lambda: Some(est.lambda),
                    truncated_lambda: Some(est.diagnostics.truncated_lambda),
                    passed: est.lambda.abs() <= tol,
                    error: None,
                },
                Err(err) => Be0FloorRow {
                    m,
                    beta,
                    lambda: None,
                    truncated_lambda: None,
                    passed: false,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_policy() {
        let p = DetectionPolicy::default();
        assert_eq!(p.threshold(None), 1e-4);
        assert_eq!(p.threshold(Some(1e-3)), 1e-2);
    }

    #[test]
    fn floor_refuses_one_dimension() {
        let mesh = Mesh::radial(1, 10.0, 32).unwrap();
        let r = be0_floor_check(1, &[Exponent::finite(3.0).unwrap()], 1.0, &mesh, 1e-3, &SweepSettings::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn zero_forcing_sweep() {
        let mesh = Mesh::line(10.0, 64).unwrap();
        let base = ProblemSpec::line(Exponent::finite(3.0).unwrap(), 1.0, Potential::zero());
        let r = m_sweep(&base, &mesh, &[4.0, 8.0], true, &SweepSettings::default()).unwrap();
        assert!(r.points.iter().all(|p| p.lambda() == Some(0.0) && p.gap == Some(0.0)));
        assert_eq!(r.infinity.as_ref().and_then(MPoint::lambda), Some(0.0));
    }
}
