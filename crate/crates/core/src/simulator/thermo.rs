//! Free energy by integrating the exact temperature derivative from beta = 0.

use serde::{Deserialize, Serialize};

use super::experiment::{derive_seed, run_experiment, SimConfig};
use super::stats::EstimatorSummary;
use crate::cavity1d::field_free_energy;
use crate::error::{Error, Result};
use crate::rs_solver::{free_energy_rs, rs_point, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub beta: f64,
    /// `E<xi(R12)>`; not simulated at beta = 0 where the derivative vanishes.
    pub xi_r12: Option<EstimatorSummary>,
    /// `beta (xi(1) - E<xi(R12)>)`.
    pub derivative: f64,
    pub derivative_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    pub config: SimConfig,
    pub grid: Vec<GridPoint>,
    /// Exact value at beta = 0 from the one-dimensional integral.
    pub f_start: f64,
    /// Simpson estimate at the last grid point.
    pub free_energy: f64,
    pub stderr: f64,
    pub trapezoid: f64,
    pub f_rs: f64,
    pub warnings: Vec<String>,
}

fn simpson_weights(m: usize, step: f64) -> Vec<f64> {
    (0..m)
        .map(|i| {
            let w = if i == 0 || i == m - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * step / 3.0
        })
        .collect()
}

/// `points` equispaced temperatures from 0 to `end`.
pub fn uniform_grid(end: f64, points: usize) -> Vec<f64> {
    let denom = points.saturating_sub(1).max(1) as f64;
    (0..points).map(|i| end * i as f64 / denom).collect()
}

/// Runs one experiment per grid temperature, each with its own derived seed.
///
/// `beta_grid` must be uniform, start at 0 and have an odd number of points.
/// `config.beta` is ignored.
pub fn thermo_integrate_free_energy(config: &SimConfig, beta_grid: &[f64]) -> Result<ThermoReport> {
    let m = beta_grid.len();
    if m < 3 || m.is_multiple_of(2) {
        return Err(Error::Validation(format!("Simpson's rule needs an odd number (>= 3) of points, got {m}")));
    }
    if beta_grid[0] != 0.0 {
        return Err(Error::Validation("temperature grid must start at beta = 0".into()));
    }
    let step = beta_grid[1] - beta_grid[0];
    if !(step > 0.0) || beta_grid.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-12 * step.max(1.0)) {
        return Err(Error::Validation("temperature grid must be uniform and increasing".into()));
    }
    let xi1 = config.mixture.total_weight();
    let mut grid = Vec::with_capacity(m);
    for (i, &beta) in beta_grid.iter().enumerate() {
        if beta == 0.0 {
            grid.push(GridPoint { beta, xi_r12: None, derivative: 0.0, derivative_stderr: 0.0 });
            continue;
        }
        let mut cfg = config.clone();
        cfg.beta = beta;
        cfg.seed = derive_seed(config.seed, 2, i as u64, 0);
        cfg.dump_every = None;
        cfg.thermo_points = None;
        let out = run_experiment(&cfg)?;
        let xi = out.report.xi_r12;
        grid.push(GridPoint {
            beta,
            xi_r12: Some(xi),
            derivative: beta * (xi1 - xi.mean),
            derivative_stderr: beta * xi.stderr,
        });
    }
    let f_start = field_free_energy(config.h, config.n as u64)?;
    let w = simpson_weights(m, step);
    let integral: f64 = grid.iter().zip(&w).map(|(g, w)| w * g.derivative).sum();
    let variance: f64 = grid.iter().zip(&w).map(|(g, w)| (w * g.derivative_stderr).powi(2)).sum();
    let trap: f64 = step
        * grid.iter().enumerate().map(|(i, g)| if i == 0 || i == m - 1 { 0.5 } else { 1.0 } * g.derivative).sum::<f64>();
    let stderr = variance.sqrt();
    let mut warnings = Vec::new();
    if (integral - trap).abs() > stderr {
        warnings.push(format!(
            "grid may be too coarse: Simpson and trapezoid differ by {:.3e}, MC error {stderr:.3e}",
            (integral - trap).abs()
        ));
    }
    let end = beta_grid[m - 1];
    let f_rs = free_energy_rs(&rs_point(&config.mixture, end, config.h, DEFAULT_TOL)?);
    let mut cfg = config.clone();
    cfg.beta = end;
    Ok(ThermoReport {
        config: cfg,
        grid,
        f_start,
        free_energy: f_start + integral,
        stderr,
        trapezoid: f_start + trap,
        f_rs,
        warnings,
    })
}
