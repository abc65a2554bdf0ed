//! Monte Carlo sampling of the spherical Gibbs measure.

pub mod chain;
pub mod disorder;
pub mod dump;
pub mod experiment;
pub mod stats;
pub mod thermo;

pub use chain::{mcmc_step, Chain, Model};
pub use disorder::{energy, sample_disorder, DisorderSample};
pub use experiment::{run_experiment, ExperimentOutput, ExperimentReport, SimConfig};
pub use stats::EstimatorSummary;
pub use thermo::{thermo_integrate_free_energy, uniform_grid, ThermoReport};
