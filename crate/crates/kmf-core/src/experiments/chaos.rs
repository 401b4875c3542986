//! Time-uniform propagation of chaos: couple the N-particle system to N
//! copies of the limiting nonlinear process sharing initial points and
//! Brownian increments, track the mean squared coupling error
//! `E(|X - Xbar|^2 + |V - Vbar|^2)` over time, take its sup, and fit the
//! log-log slope against N. No explicit constant is available, so the
//! slope (theory: -1) is the testable content; time-uniformity is checked
//! by doubling the horizon.

use crate::dynamics::{
    mckean_linear_step, step_buffered, LinearMeanPath, MeanField, NoiseLane, ParticleState,
    Workspace,
};
use crate::model::{FieldKind, ForceField};
use crate::noise::NoiseStream;
use crate::rates::Variant;
use crate::stats::{linear_fit, mean, standard_error, REDUCTION_CHUNK};

use super::{
    par_map_replicas, preflight, ExperimentError, FitResult, InitialLaw, Verdict,
};

/// How the nonlinear process is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McKeanMode {
    /// Linear fields only: the mean-field force is `gamma (x - m_x(t))`
    /// with the mean path known in closed form.
    ExactLinear,
    /// Auxiliary M-particle cloud standing in for the limiting law, with
    /// an `M^(-1/2)` error budget. Recommended `m >= 10 * max(ladder)`.
    Proxy { m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityCheck {
    /// Ladder entry re-run with the doubled horizon.
    pub n: usize,
    /// Tolerance in combined standard errors.
    pub se_factor: f64,
}

#[derive(Debug, Clone)]
pub struct ChaosConfig {
    pub field: ForceField,
    pub dt: f64,
    pub t_final: f64,
    pub stride: u64,
    pub seed: u64,
    pub replicas: usize,
    pub ladder: Vec<usize>,
    pub init: InitialLaw,
    pub mode: McKeanMode,
    pub uniformity: Option<UniformityCheck>,
}

/// Per-ladder-entry result.
#[derive(Debug, Clone)]
pub struct ChaosLevel {
    pub n: usize,
    pub times: Vec<f64>,
    /// Replica-averaged mean squared coupling error at each recorded time.
    pub mse: Vec<f64>,
    pub sup: f64,
    pub sup_t: f64,
    /// Standard error (across replicas) of the error at the sup time.
    pub sup_se: f64,
}

#[derive(Debug, Clone)]
pub struct ChaosReport {
    pub levels: Vec<ChaosLevel>,
    /// Log-log slope of sup error vs N.
    pub fit: FitResult,
    /// `(sup at T, sup at 2T, combined tolerance)` when requested.
    pub uniformity: Option<(f64, f64, f64)>,
    pub proxy_budget: Option<f64>,
    pub verdicts: Vec<Verdict>,
}

impl ChaosReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Acceptance window on the slope.
pub const SLOPE_TARGET: f64 = -1.0;
pub const SLOPE_HALF_WINDOW: f64 = 0.3;

/// Mean over particles of `|dx|^2 + |dv|^2` between two states.
fn coupling_mse(a: &ParticleState, b: &ParticleState) -> f64 {
    let len = a.x.len();
    let mut total = 0.0;
    let chunk = REDUCTION_CHUNK * a.dim;
    let mut idx = 0;
    while idx < len {
        let end = (idx + chunk).min(len);
        let mut acc = 0.0;
        for j in idx..end {
            let dx = a.x[j] - b.x[j];
            let dv = a.v[j] - b.v[j];
            acc += dx * dx + dv * dv;
        }
        total += acc;
        idx = end;
    }
    total / a.n as f64
}

/// One replica: returns the coupling-error series on the recording grid.
fn replica_series(
    cfg: &ChaosConfig,
    noise: &NoiseStream,
    n: usize,
    steps: u64,
    replica: u64,
) -> Result<Vec<f64>, ExperimentError> {
    let field = &cfg.field;
    let mut system = cfg.init.sample(n, noise, replica);
    let mut copies = system.clone();
    let lane = NoiseLane::dynamics(replica);
    let mut work_sys = Workspace::new(n, field.dim());
    let mut work_cop = Workspace::new(n, field.dim());
    let stride = cfg.stride.max(1);
    let mut series = Vec::with_capacity((steps / stride + 2) as usize);
    series.push(coupling_mse(&system, &copies));

    match cfg.mode {
        McKeanMode::ExactLinear => {
            let (mx0, mv0) = cfg.init.mean();
            let path = LinearMeanPath::new(field, mx0, mv0)?;
            for _ in 0..steps {
                step_buffered(&mut system, field, cfg.dt, noise, lane, &mut work_sys)?;
                mckean_linear_step(&mut copies, &path, field, cfg.dt, noise, lane, &mut work_cop)?;
                if system.step % stride == 0 {
                    series.push(coupling_mse(&system, &copies));
                }
            }
        }
        McKeanMode::Proxy { m } => {
            let mut cloud = cfg.init.sample(m, noise, replica);
            let cloud_lane = NoiseLane::proxy(replica);
            let mut work_cloud = Workspace::new(m, field.dim());
            for _ in 0..steps {
                // copies feel the pre-step cloud; all three then advance
                {
                    let mf = MeanField::of_cloud(field, &cloud.x, m);
                    crate::dynamics::step_with_mean_field(
                        &mut copies,
                        field,
                        &mf,
                        cfg.dt,
                        noise,
                        lane,
                        &mut work_cop,
                    )?;
                }
                step_buffered(&mut system, field, cfg.dt, noise, lane, &mut work_sys)?;
                step_buffered(&mut cloud, field, cfg.dt, noise, cloud_lane, &mut work_cloud)?;
                if system.step % stride == 0 {
                    series.push(coupling_mse(&system, &copies));
                }
            }
        }
    }
    Ok(series)
}

fn level_from_replicas(n: usize, times: Vec<f64>, all: Vec<Vec<f64>>) -> ChaosLevel {
    let grid = all[0].len();
    let mut mse = Vec::with_capacity(grid);
    for g in 0..grid {
        let vals: Vec<f64> = all.iter().map(|s| s[g]).collect();
        mse.push(mean(&vals));
    }
    let (mut sup, mut sup_idx) = (f64::NEG_INFINITY, 0);
    for (g, &m) in mse.iter().enumerate() {
        if m > sup {
            sup = m;
            sup_idx = g;
        }
    }
    let at_sup: Vec<f64> = all.iter().map(|s| s[sup_idx]).collect();
    ChaosLevel {
        n,
        sup,
        sup_t: times[sup_idx],
        sup_se: standard_error(&at_sup),
        times,
        mse,
    }
}

fn recording_times(dt: f64, steps: u64, stride: u64) -> Vec<f64> {
    let stride = stride.max(1);
    let mut times = vec![0.0];
    let mut t = 0.0;
    for s in 1..=steps {
        t += dt;
        if s % stride == 0 {
            times.push(t);
        }
    }
    times
}

pub fn run_chaos(cfg: &ChaosConfig) -> Result<ChaosReport, ExperimentError> {
    let field = &cfg.field;
    preflight(field, Variant::DoubledAlpha)?;
    if matches!(cfg.mode, McKeanMode::ExactLinear) && !matches!(field.kind, FieldKind::Linear) {
        return Err(ExperimentError::Dynamics(
            crate::dynamics::DynamicsError::FieldKindMismatch { expected: "linear" },
        ));
    }
    let noise = NoiseStream::new(cfg.seed);
    let steps = (cfg.t_final / cfg.dt).round() as u64;

    let mut levels = Vec::with_capacity(cfg.ladder.len());
    for &n in &cfg.ladder {
        let all = par_map_replicas(cfg.replicas, |r| replica_series(cfg, &noise, n, steps, r))?;
        levels.push(level_from_replicas(
            n,
            recording_times(cfg.dt, steps, cfg.stride),
            all,
        ));
    }

    let xs: Vec<f64> = levels.iter().map(|l| (l.n as f64).ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.sup.max(f64::MIN_POSITIVE).ln()).collect();
    let fit = linear_fit(&xs, &ys)
        .ok_or_else(|| ExperimentError::Degenerate("chaos ladder needs at least two levels".into()))?;
    let fit = FitResult::from_linear(fit, (cfg.ladder[0] as f64, *cfg.ladder.last().unwrap() as f64));

    let mut verdicts = vec![Verdict::new(
        "chaos/slope",
        SLOPE_TARGET,
        fit.value,
        SLOPE_HALF_WINDOW,
        (fit.value - SLOPE_TARGET).abs() <= SLOPE_HALF_WINDOW,
    )];

    let uniformity = if let Some(check) = cfg.uniformity {
        let level = levels
            .iter()
            .find(|l| l.n == check.n)
            .ok_or_else(|| ExperimentError::Degenerate("uniformity n not in ladder".into()))?;
        let all = par_map_replicas(cfg.replicas, |r| {
            replica_series(cfg, &noise, check.n, 2 * steps, r)
        })?;
        let doubled = level_from_replicas(
            check.n,
            recording_times(cfg.dt, 2 * steps, cfg.stride),
            all,
        );
        let tol = check.se_factor * (level.sup_se + doubled.sup_se) + 1e-12;
        verdicts.push(Verdict::new(
            "chaos/time_uniform",
            level.sup,
            doubled.sup,
            tol,
            (doubled.sup - level.sup).abs() <= tol,
        ));
        Some((level.sup, doubled.sup, tol))
    } else {
        None
    };

    let proxy_budget = match cfg.mode {
        McKeanMode::Proxy { m } => Some(crate::dynamics::proxy_error_budget(m)),
        McKeanMode::ExactLinear => None,
    };

    Ok(ChaosReport {
        levels,
        fit,
        uniformity,
        proxy_budget,
        verdicts,
    })
}
