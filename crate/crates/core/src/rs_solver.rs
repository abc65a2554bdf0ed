//! Replica-symmetric fixed point, free energy and the finite-N overlap equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluctuation::{assemble_m, norm1};
use crate::mixture::MixturePolynomial;
use crate::moment_engine::compute_y;

pub const DEFAULT_TOL: f64 = 1e-12;
/// Upper end of the root scan; also the clamp keeping `1/(1-q)` finite.
pub const SCAN_UPPER: f64 = 1.0 - 1e-6;
pub const SCAN_POINTS: usize = 10_000;
const Q_CLAMP: f64 = 1.0 - 1e-9;

/// A solved replica-symmetric state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RSPoint {
    pub beta: f64,
    pub h: f64,
    pub q: f64,
    pub r: f64,
    pub b: f64,
    pub mixture: MixturePolynomial,
}

impl RSPoint {
    pub fn xi1(&self) -> f64 {
        self.mixture.eval_unchecked(self.q, 1)
    }

    pub fn xi2(&self) -> f64 {
        self.mixture.eval_unchecked(self.q, 2)
    }

    /// Standard deviation of the cavity field, `beta * sqrt(xi'(q))`.
    pub fn field_sd(&self) -> f64 {
        self.beta * self.xi1().max(0.0).sqrt()
    }
}

/// `q/(1-q)^2 - h^2 - beta^2 xi'(q)`.
pub fn critical_residual(mixture: &MixturePolynomial, beta: f64, h: f64, q: f64) -> f64 {
    q / ((1.0 - q) * (1.0 - q)) - h * h - beta * beta * mixture.eval_unchecked(q, 1)
}

fn check_params(beta: f64, h: f64) -> Result<()> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Validation(format!("beta must be finite and nonnegative, got {beta}")));
    }
    if !h.is_finite() {
        return Err(Error::Validation(format!("h must be finite, got {h}")));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Bracket of a root found by the grid scan. `lo == hi` for an exact zero on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

/// Scans `g` on `SCAN_POINTS` equispaced points of `[0, SCAN_UPPER]`.
///
/// Exact zeros and strict sign changes each count once. A negative value at the
/// last grid point counts as a further root in `(SCAN_UPPER, 1)`.
pub fn scan_roots<G: Fn(f64) -> f64>(g: G) -> Vec<Bracket> {
    let grid = |i: usize| SCAN_UPPER * i as f64 / (SCAN_POINTS - 1) as f64;
    let mut out = Vec::new();
    let mut prev = (grid(0), g(grid(0)));
    if prev.1 == 0.0 {
        out.push(Bracket { lo: prev.0, hi: prev.0 });
    }
    for i in 1..SCAN_POINTS {
        let x = grid(i);
        let gx = g(x);
        if gx == 0.0 {
            out.push(Bracket { lo: x, hi: x });
        } else if prev.1 != 0.0 && (prev.1 < 0.0) != (gx < 0.0) {
            out.push(Bracket { lo: prev.0, hi: x });
        }
        prev = (x, gx);
    }
    if prev.1 < 0.0 {
        out.push(Bracket { lo: SCAN_UPPER, hi: 1.0 });
    }
    out
}

/// Bisection inside a sign-change bracket followed by guarded Newton polishing.
fn refine<G: Fn(f64) -> f64, D: Fn(f64) -> f64>(g: G, dg: D, bracket: Bracket) -> f64 {
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    if lo == hi {
        return lo;
    }
    let g_lo_neg = g(lo) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == g_lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    for _ in 0..3 {
        let d = dg(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - g(x) / d;
        if next < bracket.lo || next > bracket.hi || g(next).abs() >= g(x).abs() {
            break;
        }
        x = next;
    }
    x
}

fn unique_root<G, D>(g: G, dg: D, tol: f64, what: &str) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let roots = scan_roots(&g);
    if roots.len() != 1 {
        return Err(Error::Region(format!("{what} has {} roots on [0, 1)", roots.len())));
    }
    let bracket = roots[0];
    if bracket.lo >= SCAN_UPPER {
        return Err(Error::Region(format!("{what} root lies above {SCAN_UPPER}")));
    }
    let q = refine(&g, dg, bracket).min(Q_CLAMP);
    let res = g(q);
    if !(res.abs() <= tol) {
        return Err(Error::Numeric(format!("{what} residual {res:e} exceeds tolerance {tol:e} at q={q}")));
    }
    Ok(q)
}

fn residual_derivative(mixture: &MixturePolynomial, beta: f64, q: f64, scale: f64) -> f64 {
    scale * (1.0 + q) / (1.0 - q).powi(3) - beta * beta * mixture.eval_unchecked(q, 2)
}

pub fn solve_q(mixture: &MixturePolynomial, beta: f64, h: f64, tol: f64) -> Result<f64> {
    check_params(beta, h)?;
    check_tol(tol)?;
    unique_root(
        |q| critical_residual(mixture, beta, h, q),
        |q| residual_derivative(mixture, beta, q, 1.0),
        tol,
        "critical-point equation",
    )
}

pub fn rs_point(mixture: &MixturePolynomial, beta: f64, h: f64, tol: f64) -> Result<RSPoint> {
    let q = solve_q(mixture, beta, h, tol)?;
    Ok(point_from_q(mixture, beta, h, q))
}

pub fn point_from_q(mixture: &MixturePolynomial, beta: f64, h: f64, q: f64) -> RSPoint {
    let b = (1.0 - q) * (h * h + beta * beta * mixture.eval_unchecked(q, 1));
    RSPoint { beta, h, q, r: h * (1.0 - q), b, mixture: mixture.clone() }
}

fn rs_functional(mixture: &MixturePolynomial, beta: f64, h: f64, q: f64) -> f64 {
    let b2 = beta * beta;
    0.5 * (h * h * (1.0 - q) + q / (1.0 - q) + (-q).ln_1p() + b2 * mixture.total_weight()
        - b2 * mixture.eval_unchecked(q, 0))
}

pub fn free_energy_rs(point: &RSPoint) -> f64 {
    rs_functional(&point.mixture, point.beta, point.h, point.q)
}

/// Minimizes the replica-symmetric functional over `q` directly.
///
/// Returns `(F, q_argmin)`.
pub fn free_energy_variational(mixture: &MixturePolynomial, beta: f64, h: f64) -> Result<(f64, f64)> {
    check_params(beta, h)?;
    // stationary points of the functional are the roots of the residual
    let stationary = scan_roots(|q| critical_residual(mixture, beta, h, q));
    if stationary.len() != 1 {
        return Err(Error::Region(format!(
            "functional has {} stationary points on [0, 1)",
            stationary.len()
        )));
    }
    let f = |q: f64| rs_functional(mixture, beta, h, q);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, SCAN_UPPER);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut q = 0.5 * (lo + hi);
    // Newton on the first derivative, 2 F'(q) = residual(q)
    for _ in 0..8 {
        let d1 = critical_residual(mixture, beta, h, q);
        let d2 = residual_derivative(mixture, beta, q, 1.0);
        if d2 <= 0.0 {
            return Err(Error::Region(format!("functional is not convex near q={q}")));
        }
        let next = (q - d1 / d2).clamp(0.0, SCAN_UPPER);
        let done = (next - q).abs() <= 1e-15;
        q = next;
        if done {
            break;
        }
    }
    Ok((f(q), q))
}

/// Finite-N overlap: root of `q/(1-q)^2 = (N/(N-3))^2 (beta^2 xi'(q) + h^2)`.
pub fn solve_q_finite_n(mixture: &MixturePolynomial, beta: f64, h: f64, n: u64, tol: f64) -> Result<f64> {
    check_params(beta, h)?;
    check_tol(tol)?;
    if n < 4 {
        return Err(Error::Validation(format!("N must be at least 4, got {n}")));
    }
    let kappa = n as f64 / (n as f64 - 3.0);
    let k2 = kappa * kappa;
    unique_root(
        |q| q / ((1.0 - q) * (1.0 - q)) - k2 * (beta * beta * mixture.eval_unchecked(q, 1) + h * h),
        |q| (1.0 + q) / (1.0 - q).powi(3) - k2 * beta * beta * mixture.eval_unchecked(q, 2),
        tol,
        "finite-N overlap equation",
    )
}

/// Region diagnostics. Never fails; `passed` summarizes the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighTempDiagnostics {
    pub roots: usize,
    pub q: Option<f64>,
    pub m_norm1: Option<f64>,
    pub passed: bool,
    pub message: String,
}

pub fn high_temp_check(mixture: &MixturePolynomial, beta: f64, h: f64) -> HighTempDiagnostics {
    let fail = |roots, q, m_norm1, message: String| HighTempDiagnostics { roots, q, m_norm1, passed: false, message };
    if let Err(e) = check_params(beta, h) {
        return fail(0, None, None, e.to_string());
    }
    let roots = scan_roots(|q| critical_residual(mixture, beta, h, q));
    if roots.len() != 1 {
        return fail(roots.len(), None, None, format!("{} roots of the critical-point equation", roots.len()));
    }
    let q = match solve_q(mixture, beta, h, DEFAULT_TOL) {
        Ok(q) => q,
        Err(e) => return fail(1, None, None, e.to_string()),
    };
    let point = point_from_q(mixture, beta, h, q);
    let norm = norm1(&assemble_m(&point, &compute_y(&point)));
    if !(norm < 1.0) {
        return fail(1, Some(q), Some(norm), format!("column-sum norm of M is {norm:.4} >= 1"));
    }
    HighTempDiagnostics { roots: 1, q: Some(q), m_norm1: Some(norm), passed: true, message: "ok".into() }
}
