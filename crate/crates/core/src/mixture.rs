//! Mixture covariance function `xi(x) = sum_p w_p x^p`.
//!
//! The Gaussian Hamiltonian satisfies `E H(s1) H(s2) = N xi(R12)`. Weights are
//! stored squared (the variance carried by each degree); the simulator takes
//! square roots when it builds couplings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest interaction degree accepted anywhere in the crate.
pub const MAX_DEGREE: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureTerm {
    pub p: u32,
    pub w: f64,
}

/// Polynomial covariance profile with nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MixtureTerm>", into = "Vec<MixtureTerm>")]
pub struct MixturePolynomial {
    terms: Vec<MixtureTerm>,
}

impl MixturePolynomial {
    pub fn new(mut terms: Vec<MixtureTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Validation("mixture has no terms".into()));
        }
        terms.sort_by_key(|t| t.p);
        for pair in terms.windows(2) {
            if pair[0].p == pair[1].p {
                return Err(Error::Validation(format!("degree {} listed twice", pair[0].p)));
            }
        }
        for t in &terms {
            if t.p == 0 || t.p > MAX_DEGREE {
                return Err(Error::Validation(format!(
                    "degree {} outside 1..={MAX_DEGREE}",
                    t.p
                )));
            }
            if !t.w.is_finite() || t.w < 0.0 {
                return Err(Error::Validation(format!("weight {} for degree {} is invalid", t.w, t.p)));
            }
        }
        if !terms.iter().any(|t| t.w > 0.0) {
            return Err(Error::Validation("mixture needs at least one positive weight".into()));
        }
        Ok(Self { terms })
    }

    /// Pure two-spin interaction `xi(x) = w x^2`.
    pub fn pure(p: u32, w: f64) -> Result<Self> {
        Self::new(vec![MixtureTerm { p, w }])
    }

    pub fn terms(&self) -> &[MixtureTerm] {
        &self.terms
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.last().map(|t| t.p).unwrap_or(0)
    }

    /// `order`-th derivative of xi at `x`, for `|x| <= 1` and `order <= 3`.
    pub fn eval(&self, x: f64, order: u32) -> Result<f64> {
        if !(x.abs() <= 1.0) {
            return Err(Error::Domain(format!("overlap {x} outside [-1, 1]")));
        }
        if order > 3 {
            return Err(Error::Domain(format!("derivative order {order} > 3")));
        }
        Ok(self.eval_unchecked(x, order))
    }

    /// Same as [`eval`](Self::eval) without the domain checks; used in hot loops
    /// where overlaps may exceed 1 by rounding.
    pub fn eval_unchecked(&self, x: f64, order: u32) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.p >= order)
            .map(|t| {
                let falling: f64 = (0..order).map(|j| f64::from(t.p - j)).product();
                t.w * falling * x.powi((t.p - order) as i32)
            })
            .sum()
    }

    pub fn xi(&self, x: f64) -> Result<f64> {
        self.eval(x, 0)
    }

    pub fn d1(&self, x: f64) -> Result<f64> {
        self.eval(x, 1)
    }

    pub fn d2(&self, x: f64) -> Result<f64> {
        self.eval(x, 2)
    }

    pub fn d3(&self, x: f64) -> Result<f64> {
        self.eval(x, 3)
    }

    /// `theta(x) = x xi'(x) - xi(x)`.
    pub fn theta(&self, x: f64) -> Result<f64> {
        Ok(x * self.d1(x)? - self.xi(x)?)
    }

    /// `xi(1)`, the per-spin variance of the Hamiltonian.
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.w).sum()
    }
}

impl TryFrom<Vec<MixtureTerm>> for MixturePolynomial {
    type Error = Error;

    fn try_from(terms: Vec<MixtureTerm>) -> Result<Self> {
        Self::new(terms)
    }
}

impl From<MixturePolynomial> for Vec<MixtureTerm> {
    fn from(m: MixturePolynomial) -> Self {
        m.terms
    }
}

/// Parses the command-line form `p2:1.0,p3:0.25`.
impl FromStr for MixturePolynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |part: &str| Error::Validation(format!("bad mixture term '{part}', expected p<degree>:<weight>"));
        let mut terms = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let rest = part.strip_prefix('p').ok_or_else(|| bad(part))?;
            let (deg, w) = rest.split_once(':').ok_or_else(|| bad(part))?;
            let p = deg.trim().parse::<u32>().map_err(|_| bad(part))?;
            let w = w.trim().parse::<f64>().map_err(|_| bad(part))?;
            terms.push(MixtureTerm { p, w });
        }
        Self::new(terms)
    }
}

impl fmt::Display for MixturePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|t| format!("p{}:{}", t.p, t.w)).collect();
        f.write_str(&parts.join(","))
    }
}
