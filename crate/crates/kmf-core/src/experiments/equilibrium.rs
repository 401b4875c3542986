//! Existence of a unique equilibrium, observed directly: two systems
//! started far apart must end up at the same stationary law, and in the
//! free linear case the terminal variances must match the Gaussian
//! equilibrium of the kinetic Ornstein–Uhlenbeck system.

use crate::dynamics::{advance, MomentRecorder, NoiseLane, ParticleState};
use crate::model::{FieldKind, ForceField};
use crate::noise::NoiseStream;
use crate::rates::Variant;
use crate::transport::{w2_exact_capped, GroundMetric, PointCloud};

use super::{preflight, ExperimentError, InitialLaw, SimParams, Verdict};

#[derive(Debug, Clone)]
pub struct EquilibriumConfig {
    pub field: ForceField,
    pub sim: SimParams,
    pub init_a: InitialLaw,
    pub init_b: InitialLaw,
    /// Subsample size for the terminal W2 diagnostics (the exact solver is
    /// O(n^3)).
    pub w2_sample: usize,
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    /// `(t, m2_a, m2_b)` second-moment series of both systems.
    pub rows: Vec<(f64, f64, f64)>,
    /// Terminal per-coordinate variances of system A.
    pub var_x: Vec<f64>,
    pub var_v: Vec<f64>,
    /// W2 between terminal subsamples of A and B.
    pub cross_w2: f64,
    /// W2 between two disjoint same-law subsamples of A (sampling floor).
    pub floor_w2: f64,
    /// `(Var X, Var V)` of the Gaussian equilibrium, free linear case only.
    pub theory_var: Option<(f64, f64)>,
    pub verdicts: Vec<Verdict>,
}

impl EquilibriumReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

pub const VAR_TOLERANCE: f64 = 0.05;
pub const CROSS_FLOOR_FACTOR: f64 = 2.0;

fn column_variances(data: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim {
        let col: Vec<f64> = (0..n).map(|i| data[i * dim + k]).collect();
        out.push(crate::stats::sample_variance(&col));
    }
    out
}

pub fn run_equilibrium(cfg: &EquilibriumConfig) -> Result<EquilibriumReport, ExperimentError> {
    let field = &cfg.field;
    preflight(field, Variant::Contraction)?;
    let noise = NoiseStream::new(cfg.sim.seed);
    let steps = cfg.sim.n_steps();
    let n = cfg.sim.n;
    let dim = field.dim();

    // Two independent systems: distinct replica lanes for both the initial
    // sampling and the driving noise.
    let run_one = |init: &InitialLaw, replica: u64| -> Result<(ParticleState, MomentRecorder), ExperimentError> {
        let mut state = init.sample(n, &noise, replica);
        let mut rec = MomentRecorder::new(cfg.sim.stride);
        advance(
            &mut state,
            field,
            cfg.sim.dt,
            steps,
            &noise,
            NoiseLane::dynamics(replica),
            &mut rec,
        )?;
        Ok((state, rec))
    };
    let (state_a, rec_a) = run_one(&cfg.init_a, 0)?;
    let (state_b, rec_b) = run_one(&cfg.init_b, 1)?;

    let rows: Vec<(f64, f64, f64)> = rec_a
        .rows
        .iter()
        .zip(&rec_b.rows)
        .map(|(a, b)| (a.t, a.m2_x + a.m2_v, b.m2_x + b.m2_v))
        .collect();

    let var_x = column_variances(&state_a.x, n, dim);
    let var_v = column_variances(&state_a.v, n, dim);

    // terminal W2 diagnostics on deterministic subsamples
    let m = cfg.w2_sample.min(n / 2).max(1);
    let a_head = PointCloud::from_state_range(&state_a, 0..m);
    let a_tail = PointCloud::from_state_range(&state_a, m..2 * m);
    let b_head = PointCloud::from_state_range(&state_b, 0..m);
    let metric = GroundMetric::Euclidean;
    let (floor_w2, _) = w2_exact_capped(&a_head, &a_tail, &metric, m)?;
    let (cross_w2, _) = w2_exact_capped(&a_head, &b_head, &metric, m)?;

    let free_linear = matches!(field.kind, FieldKind::Linear)
        && field.coeffs.gamma == 0.0
        && field.coeffs.delta == 0.0;
    let theory_var = if free_linear {
        // stationary covariance of dX = V dt, dV = -(a V + beta X) dt + sqrt(2) dW
        let a = field.coeffs.alpha_prime;
        let beta = field.coeffs.beta;
        Some((1.0 / (a * beta), 1.0 / a))
    } else {
        None
    };

    let mut verdicts = vec![Verdict::new(
        "equilibrium/cross_w2",
        0.0,
        cross_w2,
        CROSS_FLOOR_FACTOR * floor_w2,
        cross_w2 <= CROSS_FLOOR_FACTOR * floor_w2,
    )];
    if let Some((tx, tv)) = theory_var {
        let mx = crate::stats::mean(&var_x);
        let mv = crate::stats::mean(&var_v);
        verdicts.push(Verdict::new(
            "equilibrium/var_x",
            tx,
            mx,
            VAR_TOLERANCE,
            (mx - tx).abs() <= VAR_TOLERANCE * tx,
        ));
        verdicts.push(Verdict::new(
            "equilibrium/var_v",
            tv,
            mv,
            VAR_TOLERANCE,
            (mv - tv).abs() <= VAR_TOLERANCE * tv,
        ));
    }

    Ok(EquilibriumReport {
        rows,
        var_x,
        var_v,
        cross_w2,
        floor_w2,
        theory_var,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_field, Coefficients, FieldKind};

    fn dirac_pair_config(n: usize, t_final: f64) -> EquilibriumConfig {
        let coeffs = Coefficients::new(1.0, 1.0, 1.0, 0.0, 0.0, 1).unwrap();
        EquilibriumConfig {
            field: make_field(FieldKind::Linear, coeffs).unwrap(),
            sim: SimParams {
                n,
                dt: 1e-3,
                t_final,
                stride: 200,
                seed: 7,
                replicas: 1,
            },
            init_a: InitialLaw::Dirac {
                x: vec![-5.0],
                v: vec![0.0],
            },
            init_b: InitialLaw::Dirac {
                x: vec![5.0],
                v: vec![0.0],
            },
            w2_sample: 256,
        }
    }

    #[test]
    fn zero_horizon_reports_initial_distance() {
        let report = run_equilibrium(&dirac_pair_config(64, 0.0)).unwrap();
        // Dirac-to-Dirac distance: |(-5,0) - (5,0)| = 10
        assert!((report.cross_w2 - 10.0).abs() < 1e-12);
        assert_eq!(report.floor_w2, 0.0);
    }

    #[test]
    fn far_apart_diracs_reach_the_same_law() {
        let report = run_equilibrium(&dirac_pair_config(2048, 15.0)).unwrap();
        assert!(
            report.cross_w2 <= 2.0 * report.floor_w2,
            "cross {} floor {}",
            report.cross_w2,
            report.floor_w2
        );
        let (tx, tv) = report.theory_var.unwrap();
        let vx = report.var_x[0];
        let vv = report.var_v[0];
        // 2048 particles put the sampling error near 3%
        assert!((vx - tx).abs() < 0.12 * tx, "var_x {vx}");
        assert!((vv - tv).abs() < 0.12 * tv, "var_v {vv}");
    }
}
