//! Adaptive Simpson quadrature on finite intervals and half-lines.

use crate::error::{Error, Result};

/// Default absolute tolerance.
pub const ATOL: f64 = 1e-10;

/// Finite intervals are first split into panels no wider than this, so that
/// narrow features are never stepped over by the coarse initial rule.
const PANEL: f64 = 0.25;
const MAX_DEPTH: u32 = 48;

/// Successive doubling-shell ratio above which a tail counts as divergent.
const DIVERGENCE_RATIO: f64 = 0.97;
const MAX_SHELLS: usize = 64;

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` to absolute tolerance `atol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, atol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, atol).map(|v| -v);
    }
    let panels = ((b - a) / PANEL).ceil().max(1.0) as usize;
    let w = (b - a) / panels as f64;
    let tol = atol / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * w;
        let hi = if k + 1 == panels { b } else { lo + w };
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = simpson(fa, fm, fb, lo, hi);
        total += adapt(&f, lo, hi, fa, fm, fb, whole, tol, MAX_DEPTH);
    }
    if !total.is_finite() {
        return Err(Error::Quadrature(format!(
            "integrand not integrable on [{a}, {b}]"
        )));
    }
    Ok(total)
}

/// `∫_a^∞ f`, or `None` when the tail visibly diverges.
///
/// The half-line is cut into shells `[a + s(2^k - 1), a + s(2^{k+1} - 1)]`
/// with `s = max(1, |a|)`, so algebraic tails give a fixed shell ratio. The
/// integral converges once a shell contributes less than `atol`; it is
/// declared divergent when shell contributions stop shrinking geometrically.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, atol: f64) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut stalled = 0;
    let scale = a.abs().max(1.0);
    for k in 0..MAX_SHELLS {
        let lo = a + scale * (2f64.powi(k as i32) - 1.0);
        let hi = a + scale * (2f64.powi(k as i32 + 1) - 1.0);
        // Wide shells only need relative accuracy; the panel split keeps
        // the cost linear in the shell width, so cap it.
        let shell = if hi - lo > 4096.0 {
            shell_integral(&f, lo, hi, atol)?
        } else {
            integrate(&f, lo, hi, atol)?
        };
        total += shell;
        if k >= 3 && shell.abs() <= atol {
            return Ok(Some(total));
        }
        if let Some(p) = prev {
            let ratio = if p != 0.0 { (shell / p).abs() } else { 0.0 };
            if ratio > DIVERGENCE_RATIO {
                stalled += 1;
                if stalled >= 3 {
                    return Ok(None);
                }
            } else {
                stalled = 0;
                // Geometric remainder once the shell ratio has settled.
                let remainder = shell * ratio / (1.0 - ratio);
                let settled = prev_ratio.is_some_and(|r: f64| (r - ratio).abs() < 1e-4);
                if k >= 3 && (remainder.abs() <= atol || (k >= 24 && settled)) {
                    return Ok(Some(total + remainder));
                }
            }
            prev_ratio = Some(ratio);
        }
        prev = Some(shell);
    }
    Ok(None)
}

/// Shell integral in the log variable `x = lo * e^t`, which turns algebraic
/// tails into smooth, slowly varying integrands.
fn shell_integral<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, atol: f64) -> Result<f64> {
    let t1 = (hi / lo).ln();
    integrate(
        |t| {
            let x = lo * t.exp();
            f(x) * x
        },
        0.0,
        t1,
        atol,
    )
}

/// `∫_{-∞}^b f`, or `None` when divergent.
pub fn integrate_from_neg_infinity<F: Fn(f64) -> f64>(
    f: F,
    b: f64,
    atol: f64,
) -> Result<Option<f64>> {
    integrate_to_infinity(|x| f(-x), -b, atol)
}

/// `∫_R f`, or `None` when either tail diverges.
pub fn integrate_line<F: Fn(f64) -> f64>(f: F, atol: f64) -> Result<Option<f64>> {
    let right = integrate_to_infinity(&f, 0.0, 0.5 * atol)?;
    let left = integrate_from_neg_infinity(&f, 0.0, 0.5 * atol)?;
    Ok(match (left, right) {
        (Some(l), Some(r)) => Some(l + r),
        _ => None,
    })
}

/// Gamma function at half-integers `n/2`, `n >= 1`.
pub fn gamma_half(n: usize) -> f64 {
    assert!(n >= 1, "gamma_half needs n >= 1");
    let (mut g, mut x) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    let target = n as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

/// Surface area of the unit sphere in `R^N`: `2 π^{N/2} / Γ(N/2)`.
/// Equals 2 for `N = 1`, counting both endpoints of `[-1, 1]`.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma_half(dim)
}
