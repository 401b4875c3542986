//! Experiment drivers: desk-scale measurements of the trend to
//! equilibrium, propagation of chaos, Gaussian deviations and the uniform
//! moment bound, each with a machine-readable verdict.
//!
//! Every driver is deterministic given `(config, seed)`: replicas are
//! mapped in index order (in parallel, but collected by index) and all
//! aggregation is order-fixed, so thread count never changes a result.

mod chaos;
mod contraction;
mod deviation;
mod equilibrium;
mod moments;

pub use chaos::{run_chaos, ChaosConfig, ChaosLevel, ChaosReport, McKeanMode, UniformityCheck};
pub use contraction::{run_contraction, ContractionConfig, ContractionReport, ContractionStatus, DecaySeriesRow};
pub use deviation::{run_deviation, DeviationConfig, DeviationLevel, DeviationReport, Observable};
pub use equilibrium::{run_equilibrium, EquilibriumConfig, EquilibriumReport};
pub use moments::{run_moment_bound, MomentConfig, MomentReport};

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{DynamicsError, ParticleState};
use crate::model::{ForceField, ModelError};
use crate::noise::{NoiseStream, StreamClass};
use crate::rates::{self, RatesError, Variant};
use crate::stats::LinearFit;
use crate::transport::TransportError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("coefficients inadmissible for this experiment: eta = {eta} >= eta0 = {eta0}")]
    Inadmissible { eta: f64, eta0: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("degenerate experiment: {0}")]
    Degenerate(String),
}

/// Common simulation knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Recording stride in steps.
    pub stride: u64,
    pub seed: u64,
    pub replicas: usize,
}

impl SimParams {
    pub fn n_steps(&self) -> u64 {
        (self.t_final / self.dt).round() as u64
    }
}

/// Initial laws the drivers can sample from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Dirac {
        x: Vec<f64>,
        v: Vec<f64>,
    },
    /// Isotropic Gaussian with independent position/velocity blocks.
    Gaussian {
        mean_x: Vec<f64>,
        mean_v: Vec<f64>,
        std_x: f64,
        std_v: f64,
    },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Dirac { x, .. } => x.len(),
            InitialLaw::Gaussian { mean_x, .. } => mean_x.len(),
        }
    }

    /// Exact mean of the law (not of any sample).
    pub fn mean(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            InitialLaw::Dirac { x, v } => (x.clone(), v.clone()),
            InitialLaw::Gaussian { mean_x, mean_v, .. } => (mean_x.clone(), mean_v.clone()),
        }
    }

    /// Samples N iid points; the draw is addressed by `replica` so distinct
    /// replicas get independent initial data and re-runs are identical.
    pub fn sample(&self, n: usize, noise: &NoiseStream, replica: u64) -> ParticleState {
        match self {
            InitialLaw::Dirac { x, v } => ParticleState::dirac(n, x, v),
            InitialLaw::Gaussian {
                mean_x,
                mean_v,
                std_x,
                std_v,
            } => {
                let dim = mean_x.len();
                let mut s = ParticleState::zeros(n, dim);
                for i in 0..n {
                    for k in 0..dim {
                        s.x[i * dim + k] = mean_x[k]
                            + std_x
                                * noise.normal(StreamClass::InitialLaw, replica, i as u64, 0, k as u64);
                        s.v[i * dim + k] = mean_v[k]
                            + std_v
                                * noise.normal(StreamClass::InitialLaw, replica, i as u64, 1, k as u64);
                    }
                }
                s
            }
        }
    }
}

/// One machine-readable check: `pass` iff `measured` is within `threshold`
/// of the criterion encoded by the name (thresholds are artifact policy,
/// not literature claims).
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub experiment: String,
    pub theory: f64,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn new(experiment: &str, theory: f64, measured: f64, threshold: f64, pass: bool) -> Self {
        Self {
            experiment: experiment.to_string(),
            theory,
            measured,
            threshold,
            pass,
        }
    }
}

/// Fitted exponent or slope with its uncertainty and window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub value: f64,
    /// 95% confidence half-width of the fitted value.
    pub half_width: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub points: usize,
}

impl FitResult {
    pub(crate) fn from_linear(fit: LinearFit, window: (f64, f64)) -> Self {
        Self {
            value: fit.slope,
            half_width: 1.96 * fit.slope_se,
            r2: fit.r2,
            window,
            points: fit.n,
        }
    }
}

/// Replica fan-out: parallel by index, collected in index order so the
/// aggregate is independent of thread count.
pub(crate) fn par_map_replicas<T, F>(count: usize, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> Result<T, ExperimentError> + Sync + Send,
{
    (0..count as u64)
        .into_par_iter()
        .map(f)
        .collect::<Result<Vec<T>, ExperimentError>>()
}

/// Seed for the preflight constant validation; fixed so experiment results
/// depend only on `(config, seed)`.
const VALIDATION_SEED: u64 = 0x5eed_c0de;
const VALIDATION_SAMPLES: usize = 2048;

/// Preflight shared by all drivers: declared constants must survive
/// sampling (hard error here, unlike the report-only validation op) and
/// `eta` must be below the variant threshold.
pub(crate) fn preflight(field: &ForceField, variant: Variant) -> Result<f64, ExperimentError> {
    crate::model::check_declared_constants(field, VALIDATION_SAMPLES, VALIDATION_SEED)?;
    let c = &field.coeffs;
    let eta0 = rates::eta0(c.alpha, c.alpha_prime, c.beta, variant)?;
    let eta = c.eta();
    if eta >= eta0 {
        return Err(ExperimentError::Inadmissible { eta, eta0 });
    }
    Ok(eta0)
}
