//! The 7x7 linear system for the limiting second moments of overlap and
//! magnetization fluctuations.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment_engine::{
    a_pair, a_single, centered_magnetization, centered_overlap, compute_v, compute_y, nu0_polynomial,
    EpsPolynomial,
};
use crate::rs_solver::RSPoint;

pub type Mat7 = [[f64; 7]; 7];
type M7 = SMatrix<f64, 7, 7>;
type V7 = SVector<f64, 7>;

pub const MAX_CONDITION: f64 = 1e6;
const NEUMANN_TERMS: usize = 40;

/// Names of the seven limits, in system order.
pub const LIMIT_NAMES: [&str; 7] = [
    "N_var_R12",
    "N_cov_R12_R13",
    "N_cov_R12_R34",
    "N_cov_R12_R1",
    "N_cov_R12_R3",
    "N_var_R1",
    "N_cov_R1_R2",
];

/// Limits `lim N * nu(f_l)` keyed by observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    #[serde(rename = "N_var_R12")]
    pub var_r12: f64,
    #[serde(rename = "N_cov_R12_R13")]
    pub cov_r12_r13: f64,
    #[serde(rename = "N_cov_R12_R34")]
    pub cov_r12_r34: f64,
    #[serde(rename = "N_cov_R12_R1")]
    pub cov_r12_r1: f64,
    #[serde(rename = "N_cov_R12_R3")]
    pub cov_r12_r3: f64,
    #[serde(rename = "N_var_R1")]
    pub var_r1: f64,
    #[serde(rename = "N_cov_R1_R2")]
    pub cov_r1_r2: f64,
}

impl Limits {
    pub fn from_array(x: [f64; 7]) -> Self {
        Self {
            var_r12: x[0],
            cov_r12_r13: x[1],
            cov_r12_r34: x[2],
            cov_r12_r1: x[3],
            cov_r12_r3: x[4],
            var_r1: x[5],
            cov_r1_r2: x[6],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.var_r12,
            self.cov_r12_r13,
            self.cov_r12_r34,
            self.cov_r12_r1,
            self.cov_r12_r3,
            self.var_r1,
            self.cov_r1_r2,
        ]
    }
}

/// Which moment enters entry (5,4) of M, `2 beta^2 (2 Y2 - 3 Y_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Entry54 {
    /// Agrees with `derive_m` and with simulation.
    Y3,
    /// Alternative reading, kept for comparison. Simulation rejects it
    /// through `N_cov_R12_R3`.
    Y4,
}

/// The matrix from its closed-form block layout.
pub fn assemble_m(point: &RSPoint, y: &[f64; 9]) -> Mat7 {
    assemble_m_with(point, y, Entry54::Y3)
}

pub fn assemble_m_with(point: &RSPoint, y: &[f64; 9], entry54: Entry54) -> Mat7 {
    let b2 = 2.0 * point.beta * point.beta;
    let h = point.h;
    let hh = 0.5 * h;
    let [y1, y2, y3, y4, y5, y6, y7, y8, y9] = *y;
    let mut m = [[0.0; 7]; 7];
    m[0][..5].copy_from_slice(&[b2 * y1, -4.0 * b2 * y2, 3.0 * b2 * y3, h * y4, -h * y5]);
    m[1][..5].copy_from_slice(&[
        b2 * y2,
        b2 * (y1 - 2.0 * y2 - 3.0 * y3),
        3.0 * b2 * (-y2 + 2.0 * y3),
        hh * (y4 + y5),
        hh * (y4 - 3.0 * y5),
    ]);
    m[2][..5].copy_from_slice(&[
        b2 * y3,
        4.0 * b2 * (y2 - 2.0 * y3),
        b2 * (y1 - 8.0 * y2 + 10.0 * y3),
        h * y5,
        h * (y4 - 2.0 * y5),
    ]);
    m[3][3..].copy_from_slice(&[b2 * (y1 - 2.0 * y2), b2 * (-2.0 * y2 + 3.0 * y3), hh * y4, hh * (y4 - 2.0 * y5)]);
    m[4][3..].copy_from_slice(&[
        b2 * (2.0 * y2 - 3.0 * if entry54 == Entry54::Y3 { y3 } else { y4 }),
        b2 * (y1 - 6.0 * y2 + 6.0 * y3),
        hh * y5,
        hh * (2.0 * y4 - 3.0 * y5),
    ]);
    m[5][3..].copy_from_slice(&[-b2 * y6, b2 * y7, hh * y8, -hh * y9]);
    m[6][3..].copy_from_slice(&[b2 * (y6 - 2.0 * y7), b2 * (-2.0 * y6 + 3.0 * y7), hh * y9, hh * (y8 - 2.0 * y9)]);
    m
}

/// Maximum absolute column sum.
pub fn norm1(m: &Mat7) -> f64 {
    (0..7).map(|j| (0..7).map(|i| m[i][j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Factor carried by the fluctuation part of an observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Factor {
    Overlap(usize, usize),
    Magnetization(usize),
}

/// Which `f_l` (0-based) the product of two centered factors is, up to relabeling.
fn classify(x: Factor, y: Factor) -> usize {
    use Factor::*;
    match (x, y) {
        (Overlap(a, b), Overlap(c, d)) => {
            let shared = [a == c, a == d, b == c, b == d].iter().filter(|&&s| s).count();
            match shared {
                2 => 0,
                1 => 1,
                _ => 2,
            }
        }
        (Overlap(a, b), Magnetization(c)) | (Magnetization(c), Overlap(a, b)) => {
            if c == a || c == b {
                3
            } else {
                4
            }
        }
        (Magnetization(a), Magnetization(b)) => {
            if a == b {
                5
            } else {
                6
            }
        }
    }
}

/// `f'_l` as (cavity part, remaining fluctuation factor, replica count).
fn primed_observables(point: &RSPoint) -> [(EpsPolynomial, Factor, usize); 7] {
    use Factor::*;
    let ov = centered_overlap(point, 0, 1);
    let mg = centered_magnetization(point, 0);
    [
        (ov.clone(), Overlap(0, 1), 2),
        (ov.clone(), Overlap(0, 2), 3),
        (ov.clone(), Overlap(2, 3), 4),
        (ov.clone(), Magnetization(0), 2),
        (ov, Magnetization(2), 3),
        (mg.clone(), Magnetization(0), 1),
        (mg, Magnetization(1), 2),
    ]
}

/// Derives M row by row from the derivative of the cavity interpolation at its
/// decoupled end, where each cavity expectation factors out of the fluctuation term.
pub fn derive_m(point: &RSPoint) -> Result<Mat7> {
    use Factor::*;
    let b2 = point.beta * point.beta;
    let h = point.h;
    let mut m = [[0.0; 7]; 7];
    for (row, (eps, g, n)) in primed_observables(point).iter().enumerate() {
        let nf = *n as f64;
        let mut add = |coeff: f64, weight: &EpsPolynomial, other: Factor| -> Result<()> {
            if coeff != 0.0 {
                m[row][classify(*g, other)] += coeff * nu0_polynomial(&(eps * weight), point)?;
            }
            Ok(())
        };
        for l in 0..*n {
            add(0.5 * h, &a_single(l), Magnetization(l))?;
            for lp in l + 1..*n {
                add(2.0 * b2, &a_pair(point, l, lp), Overlap(l, lp))?;
            }
            add(-2.0 * nf * b2, &a_pair(point, l, *n), Overlap(l, *n))?;
        }
        add(-0.5 * nf * h, &a_single(*n), Magnetization(*n))?;
        add(nf * (nf + 1.0) * b2, &a_pair(point, *n, n + 1), Overlap(*n, n + 1))?;
    }
    Ok(m)
}

/// Replacement of a fluctuation factor by its leading cavity contribution.
fn first_order(point: &RSPoint, f: Factor) -> EpsPolynomial {
    let e = EpsPolynomial::var;
    match f {
        Factor::Overlap(a, b) => e(a) * e(b) - (e(a) * e(a) + e(b) * e(b)) * (0.5 * point.q),
        Factor::Magnetization(a) => e(a) - (EpsPolynomial::constant(1.0) + e(a) * e(a)) * (0.5 * point.r),
    }
}

/// Derives the source vector by expansion instead of closed forms.
pub fn derive_v(point: &RSPoint) -> Result<[f64; 7]> {
    let mut v = [0.0; 7];
    for (slot, (eps, g, _)) in v.iter_mut().zip(primed_observables(point).iter()) {
        *slot = nu0_polynomial(&(eps * &first_order(point, *g)), point)?;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedEntry {
    /// 1-based row.
    pub row: usize,
    /// 1-based column.
    pub col: usize,
    pub assembled: f64,
    pub derived: f64,
}

/// Entries where the assembled matrix differs from the derived one.
pub fn compare_m(assembled: &Mat7, derived: &Mat7) -> Vec<FlaggedEntry> {
    let mut out = Vec::new();
    for i in 0..7 {
        for j in 0..7 {
            let (p, d) = (assembled[i][j], derived[i][j]);
            if (p - d).abs() > 1e-12 * p.abs().max(d.abs()).max(1.0) {
                out.push(FlaggedEntry { row: i + 1, col: j + 1, assembled: p, derived: d });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    pub point: RSPoint,
    pub y: [f64; 9],
    pub m: Mat7,
    pub v: [f64; 7],
    pub limits: Limits,
    /// 1-norm condition number of `I - M`.
    pub cond: f64,
    pub m_norm1: f64,
    pub residual: f64,
    /// Partial Neumann sum, present when `||M||_1 <= 0.5`.
    pub neumann_limits: Option<[f64; 7]>,
    pub m_derived: Mat7,
    pub v_derived: [f64; 7],
    /// Entries where `m` and `m_derived` differ; empty unless something is wrong.
    pub flagged: Vec<FlaggedEntry>,
    /// Solution with `Entry54::Y4`, for comparison.
    pub limits_alternative: Limits,
}

fn to_na(m: &Mat7) -> M7 {
    M7::from_fn(|i, j| m[i][j])
}

fn solve(m: &Mat7, v: &[f64; 7]) -> Result<([f64; 7], f64, f64)> {
    let a = M7::identity() - to_na(m);
    let rhs = V7::from_column_slice(v);
    let lu = a.lu();
    let x = lu.solve(&rhs).ok_or_else(|| Error::Region("I - M is singular".into()))?;
    let inv = lu.try_inverse().ok_or_else(|| Error::Region("I - M is singular".into()))?;
    let n1 = |z: &M7| z.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let cond = n1(&a) * n1(&inv);
    let residual = (a * x - rhs).amax();
    let mut out = [0.0; 7];
    out.copy_from_slice(x.as_slice());
    Ok((out, cond, residual))
}

/// `sum_{k <= K} M^k v`.
pub fn neumann_solve(m: &Mat7, v: &[f64; 7], terms: usize) -> [f64; 7] {
    let mm = to_na(m);
    let mut term = V7::from_column_slice(v);
    let mut sum = term;
    for _ in 0..terms {
        term = mm * term;
        sum += term;
    }
    let mut out = [0.0; 7];
    out.copy_from_slice(sum.as_slice());
    out
}

pub fn limiting_covariances(point: &RSPoint) -> Result<FluctuationReport> {
    let y = compute_y(point);
    let m = assemble_m(point, &y);
    let v = compute_v(point)?;
    let m_norm1 = norm1(&m);
    if !(m_norm1 < 1.0) {
        return Err(Error::Region(format!("column-sum norm of M is {m_norm1:.4} >= 1")));
    }
    let (limits, cond, residual) = solve(&m, &v)?;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Region(format!("condition number of I - M is {cond:e}")));
    }
    if residual > 1e-10 {
        return Err(Error::Numeric(format!("linear solve residual {residual:e}")));
    }
    let neumann_limits = (m_norm1 <= 0.5).then(|| neumann_solve(&m, &v, NEUMANN_TERMS));
    if let Some(nl) = neumann_limits {
        let gap = nl.iter().zip(&limits).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if gap > 1e-10 {
            return Err(Error::Numeric(format!("Neumann series disagrees with LU by {gap:e}")));
        }
    }
    let m_derived = derive_m(point)?;
    let v_derived = derive_v(point)?;
    let flagged = compare_m(&m, &m_derived);
    let (alt, _, _) = solve(&assemble_m_with(point, &y, Entry54::Y4), &v)?;
    Ok(FluctuationReport {
        point: point.clone(),
        y,
        m,
        v,
        limits: Limits::from_array(limits),
        cond,
        m_norm1,
        residual,
        neumann_limits,
        m_derived,
        v_derived,
        flagged,
        limits_alternative: Limits::from_array(alt),
    })
}
