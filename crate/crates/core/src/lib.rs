//! Replica-symmetric theory, cavity moments and Monte Carlo checks for the
//! spherical Sherrington–Kirkpatrick model with a mixed p-spin covariance.

mod error;

pub mod cavity1d;
pub mod fluctuation;
pub mod mixture;
pub mod moment_engine;
pub mod quadrature;
pub mod rs_solver;
pub mod simulator;

pub use error::{Error, Result};
pub use fluctuation::{limiting_covariances, FluctuationReport, Limits};
pub use mixture::{MixturePolynomial, MixtureTerm};
pub use moment_engine::ReplicaMonomial;
pub use rs_solver::{rs_point, RSPoint};
