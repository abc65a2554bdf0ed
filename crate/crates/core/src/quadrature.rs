//! Adaptive Gauss–Kronrod integration and Gauss–Hermite rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-13, abs_tol: 0.0, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment { lo, hi, value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

/// Globally adaptive G7K15 quadrature over the union of `[breaks[i], breaks[i+1]]`.
///
/// `breaks` must be sorted; supplying points near sharp features keeps the
/// first pass from stepping over a narrow peak.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], opts: QuadOptions) -> Result<QuadResult> {
    if breaks.len() < 2 {
        return Err(Error::Validation("need at least two break points".into()));
    }
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod15(&f, w[0], w[1]));
        } else if w[1] < w[0] {
            return Err(Error::Validation("break points must be sorted".into()));
        }
    }
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !value.is_finite() {
            return Err(Error::Numeric("integrand produced a non-finite value".into()));
        }
        if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            return Ok(QuadResult { value, error, intervals: heap.len() });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Numeric(format!(
                "quadrature did not converge: value {value:e}, error estimate {error:e} after {} intervals",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval can no longer be split in floating point
            return Err(Error::Numeric(format!(
                "quadrature stalled near {mid:e}, error estimate {error:e}"
            )));
        }
        heap.push(kronrod15(&f, worst.lo, mid));
        heap.push(kronrod15(&f, mid, worst.hi));
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breaks(f, &[lo, hi], opts)
}

/// Gauss–Hermite rule for the weight `exp(-x^2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Validation("Gauss-Hermite order must be positive".into()));
        }
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut z: f64 = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numeric(format!("Gauss-Hermite node {i} of order {n} did not converge")));
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Ok(Self { nodes, weights })
    }

    /// `E f(Z)` for a standard Gaussian `Z`.
    pub fn expect_standard_normal<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let sqrt2 = std::f64::consts::SQRT_2;
        let total: f64 = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(sqrt2 * x)).sum();
        total / std::f64::consts::PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_integrates_gaussian() {
        let r = integrate(|x: f64| (-0.5 * x * x).exp(), -40.0, 40.0, QuadOptions::default()).unwrap();
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn kronrod_handles_sqrt_endpoint() {
        // int_0^1 sqrt(x) dx = 2/3
        let r = integrate(f64::sqrt, 0.0, 1.0, QuadOptions { rel_tol: 1e-12, ..Default::default() }).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn breaks_find_narrow_peak() {
        let f = |x: f64| (-0.5 * ((x - 7.3) / 0.01).powi(2)).exp();
        let exact = 0.01 * (2.0 * std::f64::consts::PI).sqrt();
        let r = integrate_with_breaks(f, &[-1000.0, 7.2, 7.3, 7.4, 1000.0], QuadOptions::default()).unwrap();
        assert!((r.value - exact).abs() < 1e-14);
    }

    #[test]
    fn unsorted_breaks_rejected() {
        assert!(integrate_with_breaks(|x| x, &[1.0, 0.0], QuadOptions::default()).is_err());
    }

    #[test]
    fn hermite_reproduces_gaussian_moments() {
        let gh = GaussHermite::new(40).unwrap();
        let total: f64 = gh.weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        // E Z^{2k} = (2k-1)!!
        let mut dfact = 1.0;
        for k in 1..=10 {
            dfact *= (2 * k - 1) as f64;
            let m = gh.expect_standard_normal(|z| z.powi(2 * k));
            assert!((m / dfact - 1.0).abs() < 1e-12, "k={k}: {m} vs {dfact}");
            let odd = gh.expect_standard_normal(|z| z.powi(2 * k - 1));
            assert!(odd.abs() < 1e-12 * dfact * (2 * k) as f64);
        }
    }

    #[test]
    fn hermite_small_orders() {
        let gh = GaussHermite::new(1).unwrap();
        assert!(gh.nodes[0].abs() < 1e-15);
        let gh = GaussHermite::new(2).unwrap();
        assert!((gh.nodes[0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(GaussHermite::new(0).is_err());
    }
}
