//! The one-coordinate cavity density, its moments by quadrature, and the
//! saddle point of the one-dimensional radial integral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment_engine::{EpsPolynomial, ReplicaMonomial};
use crate::quadrature::{integrate_with_breaks, GaussHermite, QuadOptions};
use crate::rs_solver::RSPoint;

pub const DEFAULT_HERMITE_ORDER: usize = 40;
pub const MIN_HERMITE_ORDER: usize = 20;

/// Density `(1 - e^2/N)^((N-3)/2) exp(a e - b e^2 / 2)` on `[-sqrt N, sqrt N]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityDensityParams {
    pub n: u64,
    pub a: f64,
    pub b: f64,
}

impl CavityDensityParams {
    pub fn new(n: u64, a: f64, b: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::Validation(format!("N must be at least 4, got {n}")));
        }
        if !a.is_finite() {
            return Err(Error::Validation(format!("a must be finite, got {a}")));
        }
        if !b.is_finite() || b < 0.0 {
            return Err(Error::Validation(format!("b must be finite and nonnegative, got {b}")));
        }
        Ok(Self { n, a, b })
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn half_width(&self) -> f64 {
        self.nf().sqrt()
    }

    pub fn log_density(&self, e: f64) -> f64 {
        let n = self.nf();
        0.5 * (n - 3.0) * (-e * e / n).ln_1p() + self.a * e - 0.5 * self.b * e * e
    }

    fn log_density_slope(&self, e: f64) -> f64 {
        let n = self.nf();
        -(n - 3.0) / n * e / (1.0 - e * e / n) + self.a - self.b * e
    }

    /// Maximizer of the density (the log-density is strictly concave).
    pub fn mode(&self) -> f64 {
        let s = self.half_width();
        let (mut lo, mut hi) = (-s, s);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.log_density_slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn breaks(&self, mode: f64) -> Vec<f64> {
        let n = self.nf();
        let s = self.half_width();
        let u = mode * mode / n;
        let curvature = (n - 3.0) / n * (1.0 + u) / ((1.0 - u) * (1.0 - u)) + self.b;
        let w = 1.0 / curvature.sqrt();
        let mut pts = vec![-s, s, mode];
        let mut k = 1.0;
        while k <= 64.0 {
            for x in [mode - k * w, mode + k * w] {
                if x > -s && x < s {
                    pts.push(x);
                }
            }
            k *= 2.0;
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `(log scale, integral)` with `int f(e) rho(e) de = exp(log scale) * integral`.
    fn integral<F: Fn(f64) -> f64>(&self, f: F, abs_scale: f64) -> Result<(f64, f64)> {
        let mode = self.mode();
        let shift = self.log_density(mode);
        let breaks = self.breaks(mode);
        let opts = QuadOptions { rel_tol: 1e-13, abs_tol: 1e-15 * abs_scale, max_intervals: 5000 };
        let r = integrate_with_breaks(|e| f(e) * (self.log_density(e) - shift).exp(), &breaks, opts)
            .map_err(|e| Error::Numeric(format!("{e} (N={}, a={}, b={})", self.n, self.a, self.b)))?;
        Ok((shift, r.value))
    }

    pub fn log_z1(&self) -> Result<f64> {
        let (shift, v) = self.integral(|_| 1.0, 0.0)?;
        Ok(shift + v.ln())
    }

    pub fn z1(&self) -> Result<f64> {
        Ok(self.log_z1()?.exp())
    }

    /// Normalized expectation of `f`. `scale` is a rough size of `|f|` used for
    /// the absolute tolerance when the expectation itself is near zero.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, scale: f64) -> Result<f64> {
        let (_, z) = self.integral(|_| 1.0, 0.0)?;
        let (_, v) = self.integral(f, scale * z)?;
        Ok(v / z)
    }

    fn power_scale(&self, k: i32) -> f64 {
        (self.mode().abs() + 1.0).powi(k)
    }

    pub fn s_moment(&self, k: u32) -> Result<f64> {
        if k > 12 {
            return Err(Error::Validation(format!("moment order {k} exceeds 12")));
        }
        if k == 0 {
            return Ok(1.0);
        }
        self.expect(|e| e.powi(k as i32), self.power_scale(k as i32))
    }

    pub fn s_moments(&self, kmax: u32) -> Result<Vec<f64>> {
        (0..=kmax).map(|k| self.s_moment(k)).collect()
    }

    /// `S_k` minus its three-term recursion prediction from `S_{k-1}`, `S_{k-2}`.
    pub fn recursion_residual(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return Err(Error::Validation("recursion residual needs k >= 1".into()));
        }
        let inv = 1.0 / (self.b + 1.0);
        let s = self.s_moments(k)?;
        let prev2 = if k >= 2 { (k - 1) as f64 * inv * s[k as usize - 2] } else { 0.0 };
        Ok(s[k as usize] - self.a * inv * s[k as usize - 1] - prev2)
    }

    /// The same residual from its integral representation.
    pub fn recursion_residual_direct(&self, k: u32) -> Result<f64> {
        let n = self.nf();
        let v = self.expect(
            |e| e.powi(k as i32) * (3.0 - e * e) / (1.0 - e * e / n),
            self.power_scale(k as i32 + 2) / n,
        )?;
        Ok(v / (n * (self.b + 1.0)))
    }
}

fn hermite(order: usize) -> Result<GaussHermite> {
    if order < MIN_HERMITE_ORDER {
        return Err(Error::Validation(format!("Hermite order must be at least {MIN_HERMITE_ORDER}")));
    }
    GaussHermite::new(order)
}

/// Finite-N value of `E_z prod_l S_{k_l}(a(z))` for each monomial, sharing quadrature work.
fn nu0_many(monos: &[&[u32]], point: &RSPoint, n: u64, order: usize) -> Result<Vec<f64>> {
    let gh = hermite(order)?;
    let kmax = monos.iter().flat_map(|m| m.iter()).copied().max().unwrap_or(0);
    let sd = point.field_sd();
    let weights_total: f64 = gh.weights.iter().sum();
    let mut totals = vec![0.0; monos.len()];
    let nodes: Vec<(f64, f64)> = if sd == 0.0 {
        vec![(0.0, weights_total)]
    } else {
        gh.nodes.iter().zip(&gh.weights).map(|(&x, &w)| (x, w)).collect()
    };
    for (x, w) in nodes {
        let a = point.h + sd * std::f64::consts::SQRT_2 * x;
        let s = CavityDensityParams::new(n, a, point.b)?.s_moments(kmax)?;
        for (t, m) in totals.iter_mut().zip(monos) {
            *t += w * m.iter().map(|&k| s[k as usize]).product::<f64>();
        }
    }
    Ok(totals.into_iter().map(|t| t / weights_total).collect())
}

pub fn nu0_monomial_quadrature(mono: &ReplicaMonomial, point: &RSPoint, n: u64, hermite_order: usize) -> Result<f64> {
    Ok(nu0_many(&[mono.exponents()], point, n, hermite_order)?[0])
}

pub fn nu0_polynomial_quadrature(poly: &EpsPolynomial, point: &RSPoint, n: u64, hermite_order: usize) -> Result<f64> {
    let terms: Vec<(&[u32], f64)> = poly.terms().collect();
    let monos: Vec<&[u32]> = terms.iter().map(|t| t.0).collect();
    for m in &monos {
        ReplicaMonomial::new(m.to_vec())?;
    }
    let values = nu0_many(&monos, point, n, hermite_order)?;
    Ok(terms.iter().zip(values).map(|(t, v)| t.1 * v).sum())
}

/// Polynomial extrapolation in `1/N` to `1/N = 0` through all given points.
pub fn richardson(ns: &[u64], values: &[f64]) -> Result<f64> {
    if ns.len() != values.len() || ns.is_empty() {
        return Err(Error::Validation("need matching, nonempty N and value lists".into()));
    }
    let x: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let mut total = 0.0;
    for i in 0..x.len() {
        let mut basis = 1.0;
        for j in 0..x.len() {
            if j != i {
                if x[j] == x[i] {
                    return Err(Error::Validation("N values must be distinct".into()));
                }
                basis *= x[j] / (x[j] - x[i]);
            }
        }
        total += values[i] * basis;
    }
    Ok(total)
}

/// `c x + (N-3)/(2N) log(1 - x^2)`.
pub fn phi(x: f64, c: f64, n: u64) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::Domain(format!("phi needs |x| < 1, got {x}")));
    }
    let nf = n as f64;
    Ok(c * x + (nf - 3.0) / (2.0 * nf) * (-x * x).ln_1p())
}

/// Maximizer of `phi` by safeguarded Newton on its derivative.
pub fn phi_max_numeric(c: f64, n: u64) -> Result<f64> {
    if n < 4 {
        return Err(Error::Validation(format!("N must be at least 4, got {n}")));
    }
    if !c.is_finite() {
        return Err(Error::Validation(format!("c must be finite, got {c}")));
    }
    let kappa = (n as f64 - 3.0) / n as f64;
    // phi'(x) = c - kappa x / (1 - x^2), strictly decreasing on (-1, 1)
    let d1 = |x: f64| c - kappa * x / (1.0 - x * x);
    let d2 = |x: f64| -kappa * (1.0 + x * x) / ((1.0 - x * x) * (1.0 - x * x));
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut x = 0.0;
    for _ in 0..200 {
        let g = d1(x);
        if g == 0.0 {
            return Ok(x);
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - g / d2(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Maximizer in closed form, with `x0^2` computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddlePoint {
    pub x0: f64,
    pub x0_sq: f64,
    pub x0_sq_alt: f64,
}

/// `c_N` is the rescaled field `N c / (N - 3)`.
pub fn x0_closed_form(c_n: f64) -> Result<SaddlePoint> {
    if !c_n.is_finite() {
        return Err(Error::Validation(format!("c_N must be finite, got {c_n}")));
    }
    let root = (1.0 + 4.0 * c_n * c_n).sqrt();
    let x0 = 2.0 * c_n / (1.0 + root);
    let sp = SaddlePoint { x0, x0_sq: x0 * x0, x0_sq_alt: 1.0 - 2.0 / (1.0 + root) };
    if (sp.x0_sq - sp.x0_sq_alt).abs() > 1e-12 {
        return Err(Error::Numeric(format!("x0^2 forms disagree: {} vs {}", sp.x0_sq, sp.x0_sq_alt)));
    }
    Ok(sp)
}

/// Free energy per spin of the pure field model on the sphere of size `N`.
pub fn field_free_energy(h: f64, n: u64) -> Result<f64> {
    let scale = (n as f64).sqrt();
    let with_field = CavityDensityParams::new(n, h * scale, 0.0)?.log_z1()?;
    let bare = CavityDensityParams::new(n, 0.0, 0.0)?.log_z1()?;
    Ok((with_field - bare) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::MixturePolynomial;
    use crate::moment_engine::nu0_monomial;
    use crate::rs_solver::{rs_point, DEFAULT_TOL};
    use proptest::prelude::*;

    fn headline() -> RSPoint {
        rs_point(&MixturePolynomial::pure(2, 1.0).unwrap(), 0.2, 0.3, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn z1_tends_to_gaussian_normalizer() {
        let z = CavityDensityParams::new(10_000_000, 0.0, 0.0).unwrap().z1().unwrap();
        assert!((z - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn z1_even_in_field_free_case() {
        let p = CavityDensityParams::new(200, 0.0, 0.4).unwrap();
        let half = crate::quadrature::integrate(
            |e| p.log_density(e).exp(),
            0.0,
            p.half_width(),
            QuadOptions::default(),
        )
        .unwrap();
        assert!((p.z1().unwrap() / (2.0 * half.value) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z1_against_trapezoid() {
        let p = CavityDensityParams::new(1000, 0.5, 0.1).unwrap();
        let s = p.half_width();
        let m = 1_000_000;
        let h = 2.0 * s / m as f64;
        // endpoints carry zero density
        let trap: f64 = (1..m).map(|i| p.log_density(-s + i as f64 * h).exp()).sum::<f64>() * h;
        assert!((p.z1().unwrap() / trap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moments_basic() {
        let p = CavityDensityParams::new(500, 0.0, 0.3).unwrap();
        assert_eq!(p.s_moment(0).unwrap(), 1.0);
        assert!(p.s_moment(3).unwrap().abs() < 1e-14);
        assert!(p.recursion_residual(1).unwrap().abs() < 1e-14);
        assert!(p.s_moment(13).is_err());
    }

    #[test]
    fn first_moment_close_to_gamma1() {
        let pt = headline();
        let scaled: Vec<f64> = [1000u64, 10_000, 100_000]
            .iter()
            .map(|&n| {
                let p = CavityDensityParams::new(n, pt.h, pt.b).unwrap();
                n as f64 * (p.s_moment(1).unwrap() - pt.h / (pt.b + 1.0))
            })
            .collect();
        assert!(scaled.iter().all(|s| s.abs() < 1.0), "{scaled:?}");
    }

    #[test]
    fn residual_agrees_with_direct_integral() {
        let p = CavityDensityParams::new(1000, 0.7, 0.2).unwrap();
        for k in 1..=6 {
            let a = p.recursion_residual(k).unwrap();
            let b = p.recursion_residual_direct(k).unwrap();
            assert!((a - b).abs() < 1e-10, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn quadrature_moments_approach_engine() {
        let pt = headline();
        for (mono, n) in [(vec![2], 10_000u64), (vec![1, 1], 10_000), (vec![1, 1, 1, 1], 10_000)] {
            let m = ReplicaMonomial::new(mono).unwrap();
            let quad = nu0_monomial_quadrature(&m, &pt, n, DEFAULT_HERMITE_ORDER).unwrap();
            let exact = nu0_monomial(&m, &pt);
            assert!((quad - exact).abs() < 5.0 / n as f64, "{m:?}: {quad} vs {exact}");
        }
        assert!(nu0_monomial_quadrature(&ReplicaMonomial::new(vec![1]).unwrap(), &pt, 100, 10).is_err());
    }

    #[test]
    fn richardson_removes_polynomial_terms() {
        let f = |n: u64| 2.0 + 3.0 / n as f64 - 7.0 / (n as f64 * n as f64);
        let ns = [1000u64, 10_000, 100_000];
        let vals: Vec<f64> = ns.iter().map(|&n| f(n)).collect();
        assert!((richardson(&ns, &vals).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_examples() {
        assert_eq!(phi_max_numeric(0.0, 100).unwrap(), 0.0);
        assert_eq!(x0_closed_form(0.0).unwrap().x0, 0.0);
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((x0_closed_form(1.0).unwrap().x0 - golden).abs() < 1e-15);
        let n = 1u64 << 50;
        assert!((phi_max_numeric(1.0, n).unwrap() - golden).abs() < 1e-12);
        assert!(phi(1.0, 0.5, 10).is_err());
    }

    #[test]
    fn field_free_energy_limit() {
        // q0 solves h^2 = q/(1-q)^2
        let h = 0.3f64;
        let pt = rs_point(&MixturePolynomial::pure(2, 1.0).unwrap(), 0.0, h, DEFAULT_TOL).unwrap();
        let q = pt.q;
        let limit = 0.5 * (h * h * (1.0 - q) + q / (1.0 - q) + (1.0 - q).ln());
        let f = field_free_energy(h, 100_000).unwrap();
        assert!((f - limit).abs() < 1e-4, "{f} vs {limit}");
        assert_eq!(field_free_energy(0.0, 400).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn closed_form_matches_argmax(c in -20.0f64..20.0, n in 4u64..100_000) {
            let x = phi_max_numeric(c, n).unwrap();
            let kappa = (n as f64 - 3.0) / n as f64;
            let sp = x0_closed_form(c / kappa).unwrap();
            prop_assert!((x - sp.x0).abs() < 1e-10);
            prop_assert!((c - kappa * x / (1.0 - x * x)).abs() <= 1e-12 * c.abs().max(1.0));
        }

        #[test]
        fn square_identity(c in 0.0f64..10.0) {
            let sp = x0_closed_form(c).unwrap();
            prop_assert!((sp.x0_sq - sp.x0_sq_alt).abs() < 1e-12);
        }

        #[test]
        fn normalized(n in 10u64..5000, a in -3.0f64..3.0, b in 0.0f64..2.0) {
            let p = CavityDensityParams::new(n, a, b).unwrap();
            let s0 = p.expect(|_| 1.0, 1.0).unwrap();
            prop_assert!((s0 - 1.0).abs() < 1e-13);
        }
    }
}
