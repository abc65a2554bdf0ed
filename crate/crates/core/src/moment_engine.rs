//! Limiting cavity moments: the gamma polynomials, Gaussian moments of the
//! cavity field and the constants built from them.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rs_solver::RSPoint;

/// Highest total degree accepted for replica monomials.
pub const MAX_TOTAL_DEGREE: u32 = 8;
/// Highest replica slot accepted (slots are 0-based).
pub const MAX_REPLICAS: usize = 8;

/// Univariate polynomial in the cavity field `a`; `coeffs[j]` multiplies `a^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPolynomial {
    pub k: u32,
    pub b: f64,
    pub coeffs: Vec<f64>,
}

impl GammaPolynomial {
    pub fn eval(&self, a: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * a + c)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

fn gamma_family(kmax: u32, b: f64) -> Vec<Vec<f64>> {
    let inv = 1.0 / (b + 1.0);
    let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
    if kmax >= 1 {
        out.push(vec![0.0, inv]);
    }
    for k in 2..=kmax as usize {
        let mut c = vec![0.0; k + 1];
        for (j, &x) in out[k - 1].iter().enumerate() {
            c[j + 1] += inv * x;
        }
        for (j, &x) in out[k - 2].iter().enumerate() {
            c[j] += (k - 1) as f64 * inv * x;
        }
        out.push(c);
    }
    out
}

pub fn gamma_poly(k: u32, b: f64) -> Result<GammaPolynomial> {
    if k > MAX_TOTAL_DEGREE {
        return Err(Error::Validation(format!("gamma order {k} exceeds cap {MAX_TOTAL_DEGREE}")));
    }
    if !b.is_finite() || b < 0.0 {
        return Err(Error::Validation(format!("b must be finite and nonnegative, got {b}")));
    }
    let coeffs = gamma_family(k, b).pop().expect("family is nonempty");
    Ok(GammaPolynomial { k, b, coeffs })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `E[(mean + sd Z)^m]` for standard Gaussian `Z`.
pub fn gaussian_moment(m: u32, mean: f64, sd: f64) -> f64 {
    let mut total = 0.0;
    let mut double_fact = 1.0; // (j-1)!! for the current even j
    for j in (0..=m).step_by(2) {
        if j >= 2 {
            double_fact *= (j - 1) as f64;
        }
        total += binomial(m, j) * mean.powi((m - j) as i32) * sd.powi(j as i32) * double_fact;
    }
    total
}

/// Exponents `(k_1, ..., k_n)` of a monomial in the cavity coordinates of `n` replicas.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct ReplicaMonomial {
    exponents: Vec<u32>,
}

impl ReplicaMonomial {
    pub fn new(exponents: Vec<u32>) -> Result<Self> {
        if exponents.len() > MAX_REPLICAS {
            return Err(Error::Validation(format!(
                "{} replicas exceeds cap {MAX_REPLICAS}",
                exponents.len()
            )));
        }
        let total: u32 = exponents.iter().sum();
        if total > MAX_TOTAL_DEGREE {
            return Err(Error::Validation(format!("total degree {total} exceeds cap {MAX_TOTAL_DEGREE}")));
        }
        Ok(Self { exponents })
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

impl TryFrom<Vec<u32>> for ReplicaMonomial {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ReplicaMonomial> for Vec<u32> {
    fn from(m: ReplicaMonomial) -> Self {
        m.exponents
    }
}

impl std::str::FromStr for ReplicaMonomial {
    type Err = Error;
    /// Parses `"1,1"` or `"(1,3)"`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let exps = inner
            .split(',')
            .map(|t| t.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Validation(format!("bad monomial {s:?}: {e}")))?;
        Self::new(exps)
    }
}

/// Mean and standard deviation of the cavity field `a`.
pub fn field_law(point: &RSPoint) -> (f64, f64) {
    (point.h, point.field_sd())
}

/// Expectation of a polynomial in `a` (coefficients in increasing degree).
fn expect_in_a(coeffs: &[f64], point: &RSPoint) -> f64 {
    let (mean, sd) = field_law(point);
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(j, &c)| c * gaussian_moment(j as u32, mean, sd))
        .sum()
}

fn poly_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + y.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            out[i + j] += xi * yj;
        }
    }
    out
}

fn nu0_exponents(exps: &[u32], family: &[Vec<f64>], point: &RSPoint) -> f64 {
    let product = exps
        .iter()
        .filter(|&&k| k > 0)
        .fold(vec![1.0], |acc, &k| poly_mul(&acc, &family[k as usize]));
    expect_in_a(&product, point)
}

/// `E prod_l gamma_{k_l}(a)`: every factor shares the same field `a`.
pub fn nu0_monomial(mono: &ReplicaMonomial, point: &RSPoint) -> f64 {
    let family = gamma_family(MAX_TOTAL_DEGREE, point.b);
    nu0_exponents(mono.exponents(), &family, point)
}

/// Returns `(W, U)` from their closed forms.
pub fn compute_wu(point: &RSPoint) -> (f64, f64) {
    let (q, h) = (point.q, point.h);
    let s2 = point.beta * point.beta * point.xi1();
    let w = (1.0 - q).powi(3) * (3.0 * s2 * h + h.powi(3));
    let u = (1.0 - q).powi(4) * (h.powi(4) + 6.0 * s2 * h * h + 3.0 * s2 * s2);
    (w, u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub monomial: Vec<u32>,
    pub closed_form: f64,
    pub engine: f64,
}

pub const RELATION_TOL: f64 = 1e-12;

/// The ten low-order limiting moments, each from its closed form and from the engine.
///
/// Errors if any pair differs by more than `RELATION_TOL` (relative to `max(1, |value|)`).
pub fn relations_table(point: &RSPoint) -> Result<Vec<RelationEntry>> {
    let (q, r, h) = (point.q, point.r, point.h);
    let (w, u) = compute_wu(point);
    let c = (1.0 - q) * (1.0 - q);
    let rows: [(&[u32], f64); 10] = [
        (&[1], r),
        (&[1, 1], q),
        (&[2], 1.0),
        (&[1, 1, 1], w),
        (&[1, 2], w + h * c),
        (&[3], w + 3.0 * h * c),
        (&[2, 2], u + 1.0 - q * q),
        (&[1, 1, 2], u + q - q * q),
        (&[1, 3], u + 3.0 * q - 3.0 * q * q),
        (&[1, 1, 1, 1], u),
    ];
    let family = gamma_family(MAX_TOTAL_DEGREE, point.b);
    rows.iter()
        .map(|&(exps, closed_form)| {
            let engine = nu0_exponents(exps, &family, point);
            if (engine - closed_form).abs() > RELATION_TOL * closed_form.abs().max(1.0) {
                return Err(Error::Numeric(format!(
                    "moment engine disagrees with closed form for {exps:?}: {engine:e} vs {closed_form:e}"
                )));
            }
            Ok(RelationEntry { monomial: exps.to_vec(), closed_form, engine })
        })
        .collect()
}

/// Polynomial in the cavity coordinates of several replicas.
///
/// Keys are exponent vectors with trailing zeros trimmed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpsPolynomial {
    terms: BTreeMap<Vec<u32>, f64>,
}

fn trim(mut e: Vec<u32>) -> Vec<u32> {
    while e.last() == Some(&0) {
        e.pop();
    }
    e
}

impl EpsPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(Vec::new(), c)
    }

    pub fn monomial(exponents: Vec<u32>, coeff: f64) -> Self {
        let mut terms = BTreeMap::new();
        if coeff != 0.0 {
            terms.insert(trim(exponents), coeff);
        }
        Self { terms }
    }

    /// The coordinate of replica `l` (0-based).
    pub fn var(l: usize) -> Self {
        let mut e = vec![0; l + 1];
        e[l] = 1;
        Self::monomial(e, 1.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|k| k.iter().sum()).max().unwrap_or(0)
    }

    /// Number of replica slots touched (highest index + 1).
    pub fn n_replicas(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    fn add_term(&mut self, exps: Vec<u32>, coeff: f64) {
        let key = trim(exps);
        let v = *self.terms.entry(key.clone()).and_modify(|x| *x += coeff).or_insert(coeff);
        if v == 0.0 {
            self.terms.remove(&key);
        }
    }
}

impl Add for EpsPolynomial {
    type Output = EpsPolynomial;
    fn add(mut self, rhs: EpsPolynomial) -> EpsPolynomial {
        for (k, v) in rhs.terms {
            self.add_term(k, v);
        }
        self
    }
}

impl Neg for EpsPolynomial {
    type Output = EpsPolynomial;
    fn neg(self) -> EpsPolynomial {
        self * -1.0
    }
}

impl Sub for EpsPolynomial {
    type Output = EpsPolynomial;
    fn sub(self, rhs: EpsPolynomial) -> EpsPolynomial {
        self + (-rhs)
    }
}

impl Mul<f64> for EpsPolynomial {
    type Output = EpsPolynomial;
    fn mul(self, c: f64) -> EpsPolynomial {
        if c == 0.0 {
            return EpsPolynomial::zero();
        }
        EpsPolynomial { terms: self.terms.into_iter().map(|(k, v)| (k, v * c)).collect() }
    }
}

impl Mul for EpsPolynomial {
    type Output = EpsPolynomial;
    fn mul(self, rhs: EpsPolynomial) -> EpsPolynomial {
        &self * &rhs
    }
}

impl Mul for &EpsPolynomial {
    type Output = EpsPolynomial;
    fn mul(self, rhs: &EpsPolynomial) -> EpsPolynomial {
        let mut out = EpsPolynomial::zero();
        for (ka, &va) in &self.terms {
            for (kb, &vb) in &rhs.terms {
                let n = ka.len().max(kb.len());
                let e: Vec<u32> = (0..n)
                    .map(|i| ka.get(i).copied().unwrap_or(0) + kb.get(i).copied().unwrap_or(0))
                    .collect();
                out.add_term(e, va * vb);
            }
        }
        out
    }
}

/// Linear extension of `nu0_monomial`.
pub fn nu0_polynomial(poly: &EpsPolynomial, point: &RSPoint) -> Result<f64> {
    let family = gamma_family(MAX_TOTAL_DEGREE, point.b);
    let mut total = 0.0;
    for (exps, coeff) in poly.terms() {
        let mono = ReplicaMonomial::new(exps.to_vec())?;
        total += coeff * nu0_exponents(mono.exponents(), &family, point);
    }
    Ok(total)
}

/// `1 - eps_l^2`.
pub fn a_single(l: usize) -> EpsPolynomial {
    EpsPolynomial::constant(1.0) - EpsPolynomial::var(l) * EpsPolynomial::var(l)
}

/// The pair coefficient `a_{l,l'}` of the overlap derivative.
pub fn a_pair(point: &RSPoint, l: usize, lp: usize) -> EpsPolynomial {
    let (x1, x2) = (point.xi1(), point.xi2());
    let sq = EpsPolynomial::var(l) * EpsPolynomial::var(l) + EpsPolynomial::var(lp) * EpsPolynomial::var(lp);
    let cross = EpsPolynomial::var(l) * EpsPolynomial::var(lp);
    (EpsPolynomial::constant(x1) - sq * (0.5 * (point.q * x2 + x1)) + cross * x2) * 0.5
}

/// `eps_l eps_l' - q`.
pub fn centered_overlap(point: &RSPoint, l: usize, lp: usize) -> EpsPolynomial {
    EpsPolynomial::var(l) * EpsPolynomial::var(lp) - EpsPolynomial::constant(point.q)
}

/// `eps_l - r`.
pub fn centered_magnetization(point: &RSPoint, l: usize) -> EpsPolynomial {
    EpsPolynomial::var(l) - EpsPolynomial::constant(point.r)
}

/// The nine products whose limiting moments are `Y_1 .. Y_9` (replica indices 0-based).
pub fn y_products(point: &RSPoint) -> [EpsPolynomial; 9] {
    let ov = centered_overlap(point, 0, 1);
    let mg = centered_magnetization(point, 0);
    [
        &a_pair(point, 0, 1) * &ov,
        &a_pair(point, 0, 2) * &ov,
        &a_pair(point, 2, 3) * &ov,
        &a_single(0) * &ov,
        &a_single(2) * &ov,
        &a_pair(point, 0, 1) * &mg,
        &a_pair(point, 1, 2) * &mg,
        &a_single(0) * &mg,
        &a_single(1) * &mg,
    ]
}

pub fn compute_y(point: &RSPoint) -> [f64; 9] {
    y_products(point).map(|p| nu0_polynomial(&p, point).expect("Y products stay within the degree cap"))
}

/// `v_1` through the expansion `nu0(e1^2 e2^2) - q nu0(e1 e2) - q nu0(e1^3 e2) + q^2 nu0(e1^2)`.
pub fn v1_by_expansion(point: &RSPoint) -> f64 {
    let q = point.q;
    let n = |e: &[u32]| nu0_monomial(&ReplicaMonomial::new(e.to_vec()).expect("fixed monomial"), point);
    n(&[2, 2]) - q * n(&[1, 1]) - q * n(&[3, 1]) + q * q * n(&[2])
}

/// The closed-form source vector; errors if the expansion of `v_1` disagrees.
pub fn compute_v(point: &RSPoint) -> Result<[f64; 7]> {
    let (q, r) = (point.q, point.r);
    let (w, u) = compute_wu(point);
    let v = [
        (1.0 - q) * u + 1.0 - 4.0 * q * q + 3.0 * q.powi(3),
        (1.0 - q) * u + q * (1.0 - q) * (1.0 - 2.0 * q),
        (1.0 - q) * u - q * q * (1.0 - q),
        w - 0.5 * r * u + 0.5 * r * (2.0 - 6.0 * q + 3.0 * q * q),
        w - 0.5 * r * u + 0.5 * r * (-2.0 * q + q * q),
        -0.5 * r * w + 1.0 + 0.5 * r * r * (-4.0 + 3.0 * q),
        -0.5 * r * w + q + 0.5 * r * r * (-2.0 + q),
    ];
    let v1 = v1_by_expansion(point);
    if (v1 - v[0]).abs() > RELATION_TOL * v[0].abs().max(1.0) {
        return Err(Error::Numeric(format!("v1 expansion {v1:e} disagrees with closed form {:e}", v[0])));
    }
    Ok(v)
}
