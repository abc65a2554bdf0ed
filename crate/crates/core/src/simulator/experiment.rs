//! Quenched multi-replica Monte Carlo estimates of overlap and magnetization moments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{mcmc_step, Chain, Model};
use super::disorder::{check_budget, dot, sample_disorder};
use super::stats::{batch_means, combine_disorders, split_rhat, EstimatorSummary, SeriesSummary, DEFAULT_BATCHES};
use crate::error::{Error, Result};
use crate::fluctuation::LIMIT_NAMES;
use crate::mixture::MixturePolynomial;
use crate::rs_solver::{rs_point, DEFAULT_TOL};

pub const MIN_CHAINS: usize = 4;
pub const RHAT_LIMIT: f64 = 1.1;
const INITIAL_STEP: f64 = 0.5;

fn default_n_disorder() -> usize {
    32
}
fn default_n_chains() -> usize {
    4
}
fn default_sweeps() -> u64 {
    100_000
}
fn default_burnin() -> u64 {
    20_000
}
fn default_seed() -> u64 {
    12345
}
fn default_measure_every() -> u64 {
    10
}

/// Monte Carlo run parameters. One sweep is one global geodesic move per chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mixture: MixturePolynomial,
    pub beta: f64,
    pub h: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "default_n_disorder")]
    pub n_disorder: usize,
    #[serde(default = "default_n_chains")]
    pub n_chains: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: u64,
    #[serde(default = "default_burnin")]
    pub burnin: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Sweeps between recorded measurements.
    #[serde(default = "default_measure_every")]
    pub measure_every: u64,
    /// Sweeps between configuration dumps of the first chain of disorder 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_every: Option<u64>,
    /// When set, the `simulate` command also integrates the free energy over
    /// this many equispaced temperatures in `[0, beta]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermo_points: Option<usize>,
}

impl SimConfig {
    pub fn new(mixture: MixturePolynomial, beta: f64, h: f64, n: usize) -> Self {
        Self {
            mixture,
            beta,
            h,
            n,
            n_disorder: default_n_disorder(),
            n_chains: default_n_chains(),
            sweeps: default_sweeps(),
            burnin: default_burnin(),
            seed: default_seed(),
            measure_every: default_measure_every(),
            dump_every: None,
            thermo_points: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta < 0.0 || !self.h.is_finite() {
            return Err(Error::Validation(format!("bad beta/h: {} / {}", self.beta, self.h)));
        }
        if self.n_chains < MIN_CHAINS {
            return Err(Error::Validation(format!(
                "{} chains per disorder; the four-replica observable needs at least {MIN_CHAINS}",
                self.n_chains
            )));
        }
        if self.n_disorder == 0 {
            return Err(Error::Validation("n_disorder must be positive".into()));
        }
        if self.measure_every == 0 || self.dump_every == Some(0) {
            return Err(Error::Validation("measure_every and dump_every must be positive".into()));
        }
        if self.sweeps < 2 * self.measure_every {
            return Err(Error::Validation("sweeps must allow at least two measurements".into()));
        }
        check_budget(&self.mixture, self.n)
    }
}

/// Stream derivation: SplitMix64 finalizer applied along `(seed, kind, a, b)`.
pub fn derive_seed(seed: u64, kind: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    [kind, a, b].iter().fold(mix(seed), |acc, &v| mix(acc ^ mix(v)))
}

/// Index of each measured quantity in per-disorder series.
pub const OBSERVABLES: [&str; 11] = [
    "f1", "f2", "f3", "f4", "f5", "f6", "f7", "R12", "R1", "xi_R12", "tail",
];
const N_OBS: usize = OBSERVABLES.len();

/// Tail cutoff `2 (log N / N)^(1/4)`.
pub fn tail_threshold(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * (nf.ln() / nf).powf(0.25)
}

/// Replica-averaged observables for one set of chain states.
///
/// Every product uses distinct chains and is averaged over all assignments.
pub fn measure(
    overlaps: &[Vec<f64>],
    mags: &[f64],
    q: f64,
    r: f64,
    mixture: &MixturePolynomial,
    threshold: f64,
) -> [f64; N_OBS] {
    let k = mags.len();
    let ov = |a: usize, b: usize| overlaps[a.min(b)][a.max(b)] - q;
    let mg = |a: usize| mags[a] - r;
    let mut sums = [0.0; N_OBS];
    let mut counts = [0usize; N_OBS];
    let mut add = |i: usize, v: f64| {
        sums[i] += v;
        counts[i] += 1;
    };
    for a in 0..k {
        add(5, mg(a) * mg(a));
        add(8, mags[a]);
        for b in a + 1..k {
            let rab = overlaps[a][b];
            add(0, ov(a, b) * ov(a, b));
            add(3, ov(a, b) * mg(a));
            add(3, ov(a, b) * mg(b));
            add(6, mg(a) * mg(b));
            add(7, rab);
            add(9, mixture.eval_unchecked(rab.clamp(-1.0, 1.0), 0));
            add(10, if (rab - q).abs() >= threshold { 1.0 } else { 0.0 });
            for c in 0..k {
                if c == a || c == b {
                    continue;
                }
                add(4, ov(a, b) * mg(c));
                // center c, arms a and b
                add(1, ov(c, a) * ov(c, b));
                for d in c + 1..k {
                    if d != a && d != b {
                        add(2, ov(a, b) * ov(c, d));
                    }
                }
            }
        }
    }
    let mut out = [0.0; N_OBS];
    for i in 0..N_OBS {
        out[i] = sums[i] / counts[i] as f64;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRow {
    pub index: usize,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub acceptance: f64,
    pub step_size: f64,
    pub rhat: f64,
    pub max_energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub estimate: EstimatorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub acceptance_mean: f64,
    pub step_size_mean: f64,
    pub rhat_max: f64,
    pub rhat_flagged: bool,
    pub max_energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SimConfig,
    /// Centering values `q`, `r` from the replica-symmetric solution.
    pub q: f64,
    pub r: f64,
    pub tail_threshold: f64,
    /// `N nu(f_l)` for the seven fluctuation observables.
    pub scaled: Vec<NamedEstimate>,
    pub r12: EstimatorSummary,
    pub r1: EstimatorSummary,
    pub xi_r12: EstimatorSummary,
    pub tail: EstimatorSummary,
    pub diagnostics: Diagnostics,
    pub per_disorder: Vec<DisorderRow>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn scaled_array(&self) -> [EstimatorSummary; 7] {
        std::array::from_fn(|i| self.scaled[i].estimate)
    }
}

pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// Configurations of the first chain of disorder 0, in original coordinates.
    pub dump: Vec<Vec<f64>>,
}

struct DisorderRun {
    row: DisorderRow,
    series: Vec<SeriesSummary>,
    dump: Vec<Vec<f64>>,
}

fn adapt_rate(t: u64) -> f64 {
    0.5 / (1.0 + t as f64 / 100.0).powf(0.6)
}

fn run_disorder(cfg: &SimConfig, index: usize, q: f64, r: f64, threshold: f64) -> Result<DisorderRun> {
    let disorder = if cfg.beta == 0.0 {
        None
    } else {
        Some(sample_disorder(&cfg.mixture, cfg.n, derive_seed(cfg.seed, 0, index as u64, 0))?)
    };
    let model = match &disorder {
        Some(d) => Model::new(d, cfg.beta, cfg.h),
        None => Model::field_only(cfg.n, cfg.h),
    };
    let mut chains: Vec<Chain> = (0..cfg.n_chains)
        .map(|c| {
            let rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1, index as u64, c as u64));
            Chain::new(&model, rng, INITIAL_STEP)
        })
        .collect();
    for t in 0..cfg.burnin {
        for ch in chains.iter_mut() {
            let delta = ch.step_size;
            let acc = if mcmc_step(ch, &model, delta) { 1.0 } else { 0.0 };
            ch.step_size = (ch.step_size.ln() + adapt_rate(t) * (acc - 0.5)).exp().clamp(1e-4, std::f64::consts::PI);
        }
    }
    for ch in chains.iter_mut() {
        ch.accepted = 0;
        ch.proposed = 0;
    }
    let n_meas = (cfg.sweeps / cfg.measure_every) as usize;
    let mut series: Vec<Vec<f64>> = (0..N_OBS).map(|_| Vec::with_capacity(n_meas)).collect();
    let mut mag_traces: Vec<Vec<f64>> = vec![Vec::with_capacity(n_meas); cfg.n_chains];
    let mut dump = Vec::new();
    let nf = cfg.n as f64;
    let k = cfg.n_chains;
    let mut overlaps = vec![vec![0.0; k]; k];
    let mut mags = vec![0.0; k];
    for t in 1..=cfg.sweeps {
        for ch in chains.iter_mut() {
            let delta = ch.step_size;
            mcmc_step(ch, &model, delta);
        }
        if t % cfg.measure_every == 0 {
            for a in 0..k {
                mags[a] = model.magnetization(&chains[a].sigma);
                mag_traces[a].push(mags[a]);
                for b in a + 1..k {
                    overlaps[a][b] = dot(&chains[a].sigma, &chains[b].sigma) / nf;
                }
            }
            let obs = measure(&overlaps, &mags, q, r, &cfg.mixture, threshold);
            for (s, v) in series.iter_mut().zip(obs) {
                s.push(v);
            }
        }
        if index == 0 && cfg.dump_every.is_some_and(|e| t % e == 0) {
            dump.push(model.to_original(&chains[0].sigma));
        }
    }
    for ch in chains.iter_mut() {
        ch.recompute(&model);
    }
    let summaries: Vec<SeriesSummary> = series.iter().map(|s| batch_means(s, DEFAULT_BATCHES)).collect();
    let kf = k as f64;
    let row = DisorderRow {
        index,
        means: summaries.iter().map(|s| s.mean).collect(),
        stderrs: summaries.iter().map(|s| s.stderr).collect(),
        acceptance: chains.iter().map(Chain::acceptance_rate).sum::<f64>() / kf,
        step_size: chains.iter().map(|c| c.step_size).sum::<f64>() / kf,
        rhat: split_rhat(&mag_traces),
        max_energy_drift: chains.iter().map(|c| c.max_drift).fold(0.0, f64::max),
    };
    Ok(DisorderRun { row, series: summaries, dump })
}

pub fn run_experiment(cfg: &SimConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let point = rs_point(&cfg.mixture, cfg.beta, cfg.h, DEFAULT_TOL)?;
    let (q, r) = (point.q, point.r);
    let threshold = tail_threshold(cfg.n);
    let runs: Vec<DisorderRun> = (0..cfg.n_disorder)
        .into_par_iter()
        .map(|d| run_disorder(cfg, d, q, r, threshold))
        .collect::<Result<_>>()?;
    let combined: Vec<EstimatorSummary> = (0..N_OBS)
        .map(|i| combine_disorders(&runs.iter().map(|run| run.series[i]).collect::<Vec<_>>()))
        .collect();
    let nf = cfg.n as f64;
    let scaled = (0..7)
        .map(|i| NamedEstimate { name: LIMIT_NAMES[i].to_string(), estimate: combined[i].scaled(nf) })
        .collect();
    let rows: Vec<DisorderRow> = runs.iter().map(|run| run.row.clone()).collect();
    let nd = rows.len() as f64;
    let rhat_max = rows.iter().map(|r| r.rhat).fold(f64::NAN, f64::max);
    let diagnostics = Diagnostics {
        acceptance_mean: rows.iter().map(|r| r.acceptance).sum::<f64>() / nd,
        step_size_mean: rows.iter().map(|r| r.step_size).sum::<f64>() / nd,
        rhat_max,
        rhat_flagged: rhat_max > RHAT_LIMIT,
        max_energy_drift: rows.iter().map(|r| r.max_energy_drift).fold(0.0, f64::max),
    };
    let mut warnings = Vec::new();
    if diagnostics.rhat_flagged {
        warnings.push(format!("split-chain R-hat {rhat_max:.3} exceeds {RHAT_LIMIT}"));
    }
    if diagnostics.max_energy_drift > 1e-8 {
        warnings.push(format!("energy drift {:.3e} exceeds 1e-8", diagnostics.max_energy_drift));
    }
    let dump = runs.into_iter().next().map(|r| r.dump).unwrap_or_default();
    let report = ExperimentReport {
        config: cfg.clone(),
        q,
        r,
        tail_threshold: threshold,
        scaled,
        r12: combined[7],
        r1: combined[8],
        xi_r12: combined[9],
        tail: combined[10],
        diagnostics,
        per_disorder: rows,
        warnings,
    };
    Ok(ExperimentOutput { report, dump })
}
