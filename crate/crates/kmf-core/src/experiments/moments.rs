//! Time-uniform second moment bound: track the empirical
//! `E(|x|^2 + |v|^2)` over a long horizon, locate the running maximum and
//! check that the series plateaus instead of drifting.

use crate::dynamics::{advance, MomentRecorder, NoiseLane};
use crate::model::{FieldKind, ForceField};
use crate::noise::NoiseStream;
use crate::rates::Variant;
use crate::stats::{linear_fit, mean};

use super::{preflight, ExperimentError, InitialLaw, SimParams, Verdict};

#[derive(Debug, Clone)]
pub struct MomentConfig {
    pub field: ForceField,
    pub sim: SimParams,
    pub init: InitialLaw,
}

#[derive(Debug, Clone)]
pub struct MomentReport {
    /// `(t, m2)` series.
    pub rows: Vec<(f64, f64)>,
    pub running_max: f64,
    pub argmax_t: f64,
    /// Mean of the tail window.
    pub plateau: f64,
    /// Linear-fit slope of the tail (per unit time).
    pub tail_slope: f64,
    /// Slope relative to the plateau value.
    pub tail_slope_rel: f64,
    /// Free linear case only: `d (1/(a beta) + 1/a)`.
    pub theory_plateau: Option<f64>,
    pub verdicts: Vec<Verdict>,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Tail window fraction of the horizon used for the plateau statistics.
pub const TAIL_FRACTION: f64 = 0.6;
pub const SLOPE_TOLERANCE: f64 = 0.01;
pub const PLATEAU_TOLERANCE: f64 = 0.05;

pub fn run_moment_bound(cfg: &MomentConfig) -> Result<MomentReport, ExperimentError> {
    let field = &cfg.field;
    preflight(field, Variant::DoubledAlpha)?;
    let noise = NoiseStream::new(cfg.sim.seed);
    let mut state = cfg.init.sample(cfg.sim.n, &noise, 0);
    let mut rec = MomentRecorder::new(cfg.sim.stride);
    advance(
        &mut state,
        field,
        cfg.sim.dt,
        cfg.sim.n_steps(),
        &noise,
        NoiseLane::dynamics(0),
        &mut rec,
    )?;

    let rows: Vec<(f64, f64)> = rec.rows.iter().map(|r| (r.t, r.m2_x + r.m2_v)).collect();
    let (mut running_max, mut argmax_t) = (f64::NEG_INFINITY, 0.0);
    for &(t, m2) in &rows {
        if m2 > running_max {
            running_max = m2;
            argmax_t = t;
        }
    }

    let tail_start = TAIL_FRACTION * cfg.sim.t_final;
    let tail: Vec<(f64, f64)> = rows.iter().copied().filter(|&(t, _)| t >= tail_start).collect();
    if tail.len() < 3 {
        return Err(ExperimentError::Degenerate(
            "moment-bound tail window has too few points".into(),
        ));
    }
    let xs: Vec<f64> = tail.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.1).collect();
    let plateau = mean(&ys);
    let fit = linear_fit(&xs, &ys).expect("tail window has at least three points");
    let tail_slope = fit.slope;
    let tail_slope_rel = tail_slope / plateau;

    let free_linear = matches!(field.kind, FieldKind::Linear)
        && field.coeffs.gamma == 0.0
        && field.coeffs.delta == 0.0;
    let theory_plateau = if free_linear {
        let a = field.coeffs.alpha_prime;
        let beta = field.coeffs.beta;
        Some(field.dim() as f64 * (1.0 / (a * beta) + 1.0 / a))
    } else {
        None
    };

    let mut verdicts = vec![Verdict::new(
        "moments/tail_slope",
        0.0,
        tail_slope_rel,
        SLOPE_TOLERANCE,
        tail_slope_rel.abs() <= SLOPE_TOLERANCE,
    )];
    if let Some(th) = theory_plateau {
        verdicts.push(Verdict::new(
            "moments/plateau",
            th,
            plateau,
            PLATEAU_TOLERANCE,
            (plateau - th).abs() <= PLATEAU_TOLERANCE * th,
        ));
    }

    Ok(MomentReport {
        rows,
        running_max,
        argmax_t,
        plateau,
        tail_slope,
        tail_slope_rel,
        theory_plateau,
        verdicts,
    })
}
