//! Gaussian coupling tensors and the Hamiltonian they define.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mixture::MixturePolynomial;

/// Largest total number of tensor entries a disorder sample may hold.
pub const ENTRY_BUDGET: u128 = 200_000_000;
/// Largest N allowed when a term of degree three or more is present.
pub const MAX_N_HIGH_DEGREE: usize = 200;

/// One term `sqrt(w_p) N^((1-p)/2) sum g_{i_1..i_p} s_{i_1} .. s_{i_p}`.
#[derive(Debug, Clone)]
pub struct CouplingTensor {
    pub p: u32,
    /// `sqrt(w_p) N^((1-p)/2)`.
    pub scale: f64,
    /// Row-major entries, last index fastest.
    pub data: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DisorderSample {
    pub n: usize,
    pub seed: u64,
    pub tensors: Vec<CouplingTensor>,
}

fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard Gaussians for consecutive entries starting at `start` of the degree-`p` tensor.
///
/// Entry `k` always consumes the four 32-bit words at position `4k` of stream `p`,
/// so its value depends only on `(seed, p, k)`.
fn gaussian_block(seed: u64, p: u32, start: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(p as u64);
    rng.set_word_pos(4 * start as u128);
    for slot in out.iter_mut() {
        let u1 = 1.0 - unit_interval(rng.next_u64());
        let u2 = unit_interval(rng.next_u64());
        *slot = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    }
}

/// The Gaussian stored at flat index `k` of the degree-`p` tensor.
pub fn coupling_entry(seed: u64, p: u32, k: u64) -> f64 {
    let mut x = [0.0];
    gaussian_block(seed, p, k, &mut x);
    x[0]
}

pub fn check_budget(mixture: &MixturePolynomial, n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::Validation(format!("N must be at least 4, got {n}")));
    }
    if mixture.max_degree() >= 3 && n > MAX_N_HIGH_DEGREE {
        return Err(Error::Budget(format!(
            "N = {n} exceeds {MAX_N_HIGH_DEGREE} with a degree-{} term",
            mixture.max_degree()
        )));
    }
    let total: u128 = mixture.terms().iter().map(|t| (n as u128).pow(t.p)).sum();
    if total > ENTRY_BUDGET {
        return Err(Error::Budget(format!("{total} tensor entries exceed budget {ENTRY_BUDGET}")));
    }
    Ok(())
}

pub fn sample_disorder(mixture: &MixturePolynomial, n: usize, seed: u64) -> Result<DisorderSample> {
    check_budget(mixture, n)?;
    let tensors = mixture
        .terms()
        .iter()
        .filter(|t| t.w > 0.0)
        .map(|t| {
            let len = n.pow(t.p);
            let row = if t.p == 1 { n } else { n.pow(t.p - 1) };
            let mut data = vec![0.0; len];
            data.par_chunks_mut(row)
                .enumerate()
                .for_each(|(i, chunk)| gaussian_block(seed, t.p, (i * row) as u64, chunk));
            let scale = t.w.sqrt() * (n as f64).powf(0.5 * (1.0 - t.p as f64));
            CouplingTensor { p: t.p, scale, data }
        })
        .collect();
    Ok(DisorderSample { n, seed, tensors })
}

/// Contracts every index of `data` (order `p`) with `s`.
fn contract(data: &[f64], s: &[f64], p: u32) -> f64 {
    let n = s.len();
    let mut cur: Vec<f64> = data.chunks_exact(n).map(|row| dot(row, s)).collect();
    for _ in 1..p {
        cur = cur.chunks_exact(n).map(|row| dot(row, s)).collect();
    }
    cur[0]
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize
    let mut acc = [0.0; 4];
    let cx = x.chunks_exact(4);
    let cy = y.chunks_exact(4);
    let tail: f64 = cx.remainder().iter().zip(cy.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in cx.zip(cy) {
        for k in 0..4 {
            acc[k] += a[k] * b[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl DisorderSample {
    /// `H_N(s)`.
    pub fn hamiltonian(&self, s: &[f64]) -> f64 {
        self.tensors.iter().map(|t| t.scale * contract(&t.data, s, t.p)).sum()
    }

    pub fn tensor(&self, p: u32) -> Option<&CouplingTensor> {
        self.tensors.iter().find(|t| t.p == p)
    }
}

/// `beta H_N(s) + h sum_i s_i`.
pub fn energy(disorder: &DisorderSample, s: &[f64], beta: f64, h: f64) -> f64 {
    let field = h * s.iter().sum::<f64>();
    if beta == 0.0 {
        return field;
    }
    beta * disorder.hamiltonian(s) + field
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::MixtureTerm;

    #[test]
    fn entries_are_pure_functions_of_index() {
        let m = MixturePolynomial::new(vec![MixtureTerm { p: 1, w: 0.5 }, MixtureTerm { p: 2, w: 1.0 }]).unwrap();
        let d = sample_disorder(&m, 7, 99).unwrap();
        let again = sample_disorder(&m, 7, 99).unwrap();
        for (a, b) in d.tensors.iter().zip(&again.tensors) {
            assert_eq!(a.data, b.data);
        }
        let t2 = d.tensor(2).unwrap();
        assert_eq!(t2.data[23], coupling_entry(99, 2, 23));
        assert_eq!(d.tensor(1).unwrap().data[3], coupling_entry(99, 1, 3));
        assert_ne!(sample_disorder(&m, 7, 100).unwrap().tensors[1].data, t2.data);
    }

    #[test]
    fn gaussian_stream_moments() {
        let mut x = vec![0.0; 200_000];
        gaussian_block(5, 2, 0, &mut x);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 0.01 && (var - 1.0).abs() < 0.01, "{mean} {var}");
    }

    #[test]
    fn budget_guards() {
        let cubic = MixturePolynomial::pure(3, 1.0).unwrap();
        assert!(matches!(check_budget(&cubic, 201), Err(Error::Budget(_))));
        assert!(check_budget(&cubic, 200).is_ok());
        let big = MixturePolynomial::pure(2, 1.0).unwrap();
        assert!(matches!(check_budget(&big, 20_000), Err(Error::Budget(_))));
        assert!(check_budget(&big, 3).is_err());
    }

    #[test]
    fn energy_examples() {
        let m = MixturePolynomial::pure(2, 1.0).unwrap();
        let d = sample_disorder(&m, 6, 1).unwrap();
        let s = [1.0, -1.0, 1.0, 1.0, -1.0, 1.0];
        assert_eq!(energy(&d, &s, 0.0, 0.3), 0.3 * 2.0);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        assert!((energy(&d, &s, 0.7, 0.0) - energy(&d, &neg, 0.7, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn cubic_contraction_matches_triple_sum() {
        let m = MixturePolynomial::pure(3, 2.0).unwrap();
        let n = 5;
        let d = sample_disorder(&m, n, 3).unwrap();
        let s: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let t = d.tensor(3).unwrap();
        let mut direct = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    direct += t.data[(i * n + j) * n + k] * s[i] * s[j] * s[k];
                }
            }
        }
        let expect = 2f64.sqrt() / n as f64 * direct;
        assert!((d.hamiltonian(&s) - expect).abs() < 1e-12);
    }
}
