//! Tridiagonal and bordered tridiagonal solves.

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of the largest diagonal entry are
/// treated as singular.
const PIVOT_RATIO: f64 = 1e-14;

/// LU factors of a tridiagonal matrix (Thomas algorithm, no pivoting).
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    /// Multipliers `l_i = a_i / d_{i-1}`.
    mult: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    /// Factors the matrix with sub-diagonal `lower[1..]`, diagonal `diag`
    /// and super-diagonal `upper[..n-1]`.
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        assert!(lower.len() == n && upper.len() == n, "band length mismatch");
        let scale = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
        let mut mult = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        let mut min_ratio = f64::INFINITY;
        for i in 0..n {
            let mut p = diag[i];
            if i > 0 {
                mult[i] = lower[i] / pivots[i - 1];
                p -= mult[i] * upper[i - 1];
            }
            let ratio = p.abs() / scale;
            min_ratio = min_ratio.min(ratio);
            if !(ratio > PIVOT_RATIO) {
                return Err(Error::SingularJacobian {
                    pivot_ratio: min_ratio,
                });
            }
            pivots[i] = p;
        }
        Ok(Tridiagonal {
            mult,
            pivots,
            upper: upper.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    /// Solves in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.len();
        for i in 1..n {
            x[i] -= self.mult[i] * x[i - 1];
        }
        if n == 0 {
            return;
        }
        x[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.upper[i] * x[i + 1]) / self.pivots[i];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// One-shot tridiagonal solve.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    Ok(Tridiagonal::factor(lower, diag, upper)?.solve(rhs))
}

/// Sub-diagonals of the reduced system below.
const KL: usize = 2;
/// Stored columns per row position: `p - KL ..= p + 3`.
const WINDOW: usize = 6;

/// Solves `J dv + c dλ = r` subject to `dv_k = 0`, where `J` is tridiagonal
/// with bands `(lower, diag, upper)` and `c` is the border column.
///
/// Dropping column `k` and appending `c` leaves a square system with two
/// sub-diagonals, one super-diagonal and a dense last column. It is solved
/// by banded elimination with partial pivoting; the blocks on either side
/// of `k` may be singular on their own (a radial row that ignores the
/// origin makes the outer block's rows sum to zero).
pub fn solve_bordered(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    border: &[f64],
    rhs: &[f64],
    k: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = diag.len();
    assert!(k < n && lower.len() == n && upper.len() == n && border.len() == n && rhs.len() == n);
    if n == 1 {
        return Ok((vec![0.0], scalar_pivot(border[0], border[0].abs(), rhs[0])?));
    }
    // Band columns 0..n-1 hold the nodes other than k; `w` is the λ column.
    let bands = n - 1;
    let col = |j: usize| if j < k { j } else { j - 1 };
    let mut a = vec![[0.0_f64; WINDOW]; n];
    let slot = |p: usize, c: usize| c + KL - p;
    for i in 0..n {
        let mut put = |j: usize, v: f64| {
            if j != k {
                a[i][slot(i, col(j))] = v;
            }
        };
        if i > 0 {
            put(i - 1, lower[i]);
        }
        put(i, diag[i]);
        if i + 1 < n {
            put(i + 1, upper[i]);
        }
    }
    let mut w = border.to_vec();
    let mut b = rhs.to_vec();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .chain(w.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));

    // Before step c, positions c..=c+KL have nonzeros in band columns
    // c..=c+3 only.
    for c in 0..bands {
        let last_row = (c + KL).min(n - 1);
        let last_col = (c + 3).min(bands - 1);
        let (mut best, mut best_abs) = (c, a[c][slot(c, c)].abs());
        for p in c + 1..=last_row {
            let v = a[p][slot(p, c)].abs();
            if v > best_abs {
                best = p;
                best_abs = v;
            }
        }
        if !(best_abs > PIVOT_RATIO * scale) {
            return Err(Error::SingularJacobian {
                pivot_ratio: best_abs / scale,
            });
        }
        if best != c {
            for cc in c..=last_col {
                let t = a[c][slot(c, cc)];
                a[c][slot(c, cc)] = a[best][slot(best, cc)];
                a[best][slot(best, cc)] = t;
            }
            w.swap(c, best);
            b.swap(c, best);
        }
        let pivot = a[c][slot(c, c)];
        for p in c + 1..=last_row {
            let f = a[p][slot(p, c)] / pivot;
            if f == 0.0 {
                continue;
            }
            a[p][slot(p, c)] = 0.0;
            for cc in c + 1..=last_col {
                a[p][slot(p, cc)] -= f * a[c][slot(c, cc)];
            }
            w[p] -= f * w[c];
            b[p] -= f * b[c];
        }
    }
    let dl = scalar_pivot(w[n - 1], scale, b[n - 1])?;
    let mut x = vec![0.0; bands];
    for p in (0..bands).rev() {
        let mut s = b[p] - w[p] * dl;
        for cc in p + 1..=(p + 3).min(bands - 1) {
            s -= a[p][slot(p, cc)] * x[cc];
        }
        x[p] = s / a[p][slot(p, p)];
    }
    let dv = (0..n).map(|j| if j == k { 0.0 } else { x[col(j)] }).collect();
    Ok((dv, dl))
}

fn scalar_pivot(pivot: f64, scale: f64, rhs: f64) -> Result<f64> {
    if !(pivot.abs() > PIVOT_RATIO * scale) {
        return Err(Error::SingularJacobian {
            pivot_ratio: pivot.abs() / scale.max(f64::MIN_POSITIVE),
        });
    }
    Ok(rhs / pivot)
}
