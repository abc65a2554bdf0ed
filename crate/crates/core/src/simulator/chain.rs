//! Geodesic random-walk Metropolis on the sphere of radius sqrt(N).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::disorder::{dot, energy, DisorderSample};

/// Steps between renormalization of the radius and full energy recomputation.
pub const RECOMPUTE_EVERY: u64 = 1000;

/// Log Gibbs weight `beta H + h sum s` in a basis where it is cheap to evaluate.
///
/// When every term has degree at most two the quadratic form is diagonalized
/// once, so each evaluation costs O(N). Rotations preserve both the uniform
/// measure on the sphere and the isotropic proposal, so chains can run in the
/// rotated coordinates; overlaps between chains of one disorder are unchanged.
pub enum Model<'a> {
    Quadratic {
        n: usize,
        /// Diagonal of the quadratic form.
        lambda: Vec<f64>,
        linear: Vec<f64>,
        /// Image of the all-ones vector, used for the magnetization.
        ones: Vec<f64>,
        /// Columns are the rotated basis; `None` means the identity.
        basis: Option<DMatrix<f64>>,
        reference: Option<(&'a DisorderSample, f64, f64)>,
    },
    General {
        disorder: &'a DisorderSample,
        beta: f64,
        h: f64,
    },
}

impl<'a> Model<'a> {
    /// Field-only weight `h sum s` (no disorder needed).
    pub fn field_only(n: usize, h: f64) -> Self {
        Model::Quadratic {
            n,
            lambda: vec![0.0; n],
            linear: vec![h; n],
            ones: vec![1.0; n],
            basis: None,
            reference: None,
        }
    }

    pub fn new(disorder: &'a DisorderSample, beta: f64, h: f64) -> Self {
        let n = disorder.n;
        if beta == 0.0 {
            return Self::field_only(n, h);
        }
        if disorder.tensors.iter().any(|t| t.p > 2) {
            return Model::General { disorder, beta, h };
        }
        let mut linear = DVector::from_element(n, h);
        if let Some(t) = disorder.tensor(1) {
            linear += DVector::from_column_slice(&t.data) * (beta * t.scale);
        }
        let reference = Some((disorder, beta, h));
        match disorder.tensor(2) {
            None => Model::Quadratic {
                n,
                lambda: vec![0.0; n],
                linear: linear.as_slice().to_vec(),
                ones: vec![1.0; n],
                basis: None,
                reference,
            },
            Some(t) => {
                let g = DMatrix::from_row_slice(n, n, &t.data);
                let sym = (&g + g.transpose()) * (0.5 * beta * t.scale);
                let eig = SymmetricEigen::new(sym);
                let basis = eig.eigenvectors;
                let lin = basis.tr_mul(&linear);
                let ones = basis.tr_mul(&DVector::from_element(n, 1.0));
                Model::Quadratic {
                    n,
                    lambda: eig.eigenvalues.as_slice().to_vec(),
                    linear: lin.as_slice().to_vec(),
                    ones: ones.as_slice().to_vec(),
                    basis: Some(basis),
                    reference,
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Model::Quadratic { n, .. } => *n,
            Model::General { disorder, .. } => disorder.n,
        }
    }

    pub fn log_weight(&self, s: &[f64]) -> f64 {
        match self {
            Model::Quadratic { lambda, linear, .. } => {
                let quad: f64 = lambda.iter().zip(s).map(|(l, x)| l * x * x).sum();
                quad + dot(linear, s)
            }
            Model::General { disorder, beta, h } => energy(disorder, s, *beta, *h),
        }
    }

    /// `N^{-1} sum_i s_i` in original coordinates.
    pub fn magnetization(&self, s: &[f64]) -> f64 {
        let total = match self {
            Model::Quadratic { ones, .. } => dot(ones, s),
            Model::General { .. } => s.iter().sum(),
        };
        total / self.n() as f64
    }

    /// Configuration in the original coordinates.
    pub fn to_original(&self, s: &[f64]) -> Vec<f64> {
        match self {
            Model::Quadratic { basis: Some(b), .. } => (b * DVector::from_column_slice(s)).as_slice().to_vec(),
            _ => s.to_vec(),
        }
    }

    /// Energy recomputed from the coupling tensors in original coordinates.
    pub fn reference_energy(&self, s: &[f64]) -> f64 {
        match self {
            Model::Quadratic { reference: Some((d, beta, h)), .. } => energy(d, &self.to_original(s), *beta, *h),
            _ => self.log_weight(s),
        }
    }
}

pub struct Chain {
    pub sigma: Vec<f64>,
    pub log_weight: f64,
    pub step_size: f64,
    pub accepted: u64,
    pub proposed: u64,
    pub max_drift: f64,
    pub rng: ChaCha8Rng,
    scratch: Vec<f64>,
    since_recompute: u64,
}

impl Chain {
    /// Starts from a uniform point on the sphere.
    pub fn new(model: &Model, mut rng: ChaCha8Rng, step_size: f64) -> Self {
        let n = model.n();
        let mut sigma: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&sigma, &sigma).sqrt();
        let scale = (n as f64).sqrt() / norm;
        sigma.iter_mut().for_each(|x| *x *= scale);
        Self::from_state(model, sigma, rng, step_size)
    }

    pub fn from_state(model: &Model, sigma: Vec<f64>, rng: ChaCha8Rng, step_size: f64) -> Self {
        let log_weight = model.log_weight(&sigma);
        let n = sigma.len();
        Self {
            sigma,
            log_weight,
            step_size,
            accepted: 0,
            proposed: 0,
            max_drift: 0.0,
            rng,
            scratch: vec![0.0; n],
            since_recompute: 0,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Restores the radius exactly and compares the running log-weight with a
    /// fresh evaluation from the coupling tensors.
    pub fn recompute(&mut self, model: &Model) {
        let n = self.sigma.len() as f64;
        let scale = (n / dot(&self.sigma, &self.sigma)).sqrt();
        self.sigma.iter_mut().for_each(|x| *x *= scale);
        self.log_weight = model.log_weight(&self.sigma);
        let fresh = model.reference_energy(&self.sigma);
        self.max_drift = self.max_drift.max((fresh - self.log_weight).abs());
        self.since_recompute = 0;
    }
}

/// One geodesic Metropolis move with angle `theta ~ Normal(0, delta^2)`. Returns acceptance.
pub fn mcmc_step(chain: &mut Chain, model: &Model, delta: f64) -> bool {
    let n = chain.sigma.len();
    let nf = n as f64;
    let Chain { sigma, scratch, rng, .. } = chain;
    for x in scratch.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    let along = dot(scratch, sigma) / nf;
    for (u, s) in scratch.iter_mut().zip(sigma.iter()) {
        *u -= along * s;
    }
    let unorm = dot(scratch, scratch).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    let theta = delta * z;
    let (sin, cos) = theta.sin_cos();
    let k = sin * nf.sqrt() / unorm;
    for (u, s) in scratch.iter_mut().zip(sigma.iter()) {
        *u = cos * s + k * *u;
    }
    let proposed = model.log_weight(scratch);
    let diff = proposed - chain.log_weight;
    let accept = diff >= 0.0 || chain.rng.random::<f64>().ln() < diff;
    chain.proposed += 1;
    if accept {
        std::mem::swap(&mut chain.sigma, &mut chain.scratch);
        chain.log_weight = proposed;
        chain.accepted += 1;
    }
    chain.since_recompute += 1;
    if chain.since_recompute >= RECOMPUTE_EVERY {
        chain.recompute(model);
    }
    accept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{MixturePolynomial, MixtureTerm};
    use crate::simulator::disorder::sample_disorder;
    use rand::SeedableRng;

    #[test]
    fn zero_step_is_stationary() {
        let m = MixturePolynomial::pure(2, 1.0).unwrap();
        let d = sample_disorder(&m, 30, 4).unwrap();
        let model = Model::new(&d, 0.5, 0.2);
        let mut c = Chain::new(&model, ChaCha8Rng::seed_from_u64(1), 0.0);
        let start = c.sigma.clone();
        for _ in 0..50 {
            assert!(mcmc_step(&mut c, &model, 0.0));
        }
        assert_eq!(c.sigma, start);
    }

    #[test]
    fn radius_is_preserved() {
        let model = Model::field_only(50, 0.0);
        let mut c = Chain::new(&model, ChaCha8Rng::seed_from_u64(2), 1.0);
        for _ in 0..999 {
            mcmc_step(&mut c, &model, 1.0);
        }
        assert!((dot(&c.sigma, &c.sigma) - 50.0).abs() < 1e-9);
        assert_eq!(c.accepted, c.proposed);
    }

    #[test]
    fn rotated_weight_matches_tensor_energy() {
        let m = MixturePolynomial::new(vec![MixtureTerm { p: 1, w: 0.3 }, MixtureTerm { p: 2, w: 1.0 }]).unwrap();
        let d = sample_disorder(&m, 40, 8).unwrap();
        let model = Model::new(&d, 0.4, 0.3);
        let mut c = Chain::new(&model, ChaCha8Rng::seed_from_u64(3), 0.3);
        for _ in 0..20 {
            mcmc_step(&mut c, &model, 0.3);
            let direct = energy(&d, &model.to_original(&c.sigma), 0.4, 0.3);
            assert!((c.log_weight - direct).abs() < 1e-8);
        }
        let orig = model.to_original(&c.sigma);
        let mag = orig.iter().sum::<f64>() / 40.0;
        assert!((model.magnetization(&c.sigma) - mag).abs() < 1e-12);
    }

    #[test]
    fn general_model_uses_tensors() {
        let m = MixturePolynomial::new(vec![MixtureTerm { p: 2, w: 1.0 }, MixtureTerm { p: 3, w: 0.5 }]).unwrap();
        let d = sample_disorder(&m, 12, 8).unwrap();
        let model = Model::new(&d, 0.4, 0.1);
        assert!(matches!(model, Model::General { .. }));
        let mut c = Chain::new(&model, ChaCha8Rng::seed_from_u64(5), 0.3);
        for _ in 0..RECOMPUTE_EVERY {
            mcmc_step(&mut c, &model, 0.3);
        }
        assert!(c.max_drift < 1e-8);
        assert!((c.log_weight - energy(&d, &c.sigma, 0.4, 0.1)).abs() < 1e-10);
    }
}
