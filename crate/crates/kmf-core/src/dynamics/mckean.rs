//! Integrators for the limiting nonlinear process.
//!
//! The nonlinear process carries its own law in its drift, so it cannot be
//! simulated directly. Two substitutes are provided:
//!
//! * for linear fields the mean-field force collapses to
//!   `gamma (x - m_x(t))` where the mean `(m_x, m_v)` solves the damped
//!   oscillator ODE `m_x' = m_v`, `m_v' = -alpha m_v - beta m_x` in closed
//!   form, making each copy of the nonlinear process an exactly
//!   specified linear SDE ([`advance_mckean_linear`]);
//! * for general fields an auxiliary M-particle cloud with `M >> N` stands
//!   in for the limiting law, with an `M^(-1/2)` error budget
//!   ([`advance_mckean_proxy`]).
//!
//! Copies share noise addresses with their companion particle system, so
//! the chaos experiment consumes identical increments on both sides.

use crate::model::{FieldKind, ForceField};
use crate::noise::NoiseStream;

use super::{
    advance, DynamicsError, MeanField, NoiseLane, ParticleState, Recorder, Workspace,
};

/// Closed-form mean trajectory of the nonlinear process for linear fields.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMeanPath {
    friction_slope: f64,
    beta: f64,
    mean_x0: Vec<f64>,
    mean_v0: Vec<f64>,
}

/// Entries of `exp(t M)` for the companion matrix `M = [[0, 1], [-beta, -a]]`.
fn expm2(a: f64, beta: f64, t: f64) -> [f64; 4] {
    // eigenvalues solve s^2 + a s + beta = 0
    let mu = -a / 2.0;
    let disc = a * a / 4.0 - beta;
    let scale = (mu * t).exp();
    // exp(tM) = e^{mu t} ( w0 I + w1 (M - mu I) ), with (w0, w1) depending
    // on the sign of the discriminant
    let (w0, w1) = if disc.abs() < 1e-12 * (a * a / 4.0 + beta).max(1.0) {
        (1.0, t)
    } else if disc < 0.0 {
        let w = (-disc).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else {
        let s = disc.sqrt();
        ((s * t).cosh(), (s * t).sinh() / s)
    };
    // M - mu I = [[a/2, 1], [-beta, -a/2]]
    [
        scale * (w0 + w1 * a / 2.0),
        scale * w1,
        scale * (-beta * w1),
        scale * (w0 - w1 * a / 2.0),
    ]
}

impl LinearMeanPath {
    /// Requires a linear field; the initial means come from the initial
    /// law, not from any empirical sample.
    pub fn new(field: &ForceField, mean_x0: Vec<f64>, mean_v0: Vec<f64>) -> Result<Self, DynamicsError> {
        if !matches!(field.kind, FieldKind::Linear) {
            return Err(DynamicsError::FieldKindMismatch { expected: "linear" });
        }
        assert_eq!(mean_x0.len(), mean_v0.len());
        Ok(Self {
            friction_slope: field.coeffs.alpha_prime,
            beta: field.coeffs.beta,
            mean_x0,
            mean_v0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean_x0.len()
    }

    /// `(m_x(t), m_v(t))`, each coordinate propagated by the same 2x2
    /// exponential.
    pub fn mean_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let e = expm2(self.friction_slope, self.beta, t);
        let d = self.dim();
        let mut mx = vec![0.0; d];
        let mut mv = vec![0.0; d];
        for k in 0..d {
            mx[k] = e[0] * self.mean_x0[k] + e[1] * self.mean_v0[k];
            mv[k] = e[2] * self.mean_x0[k] + e[3] * self.mean_v0[k];
        }
        (mx, mv)
    }
}

/// One Euler–Maruyama step of N independent copies of the nonlinear
/// process in the linear-field reduction. The mean-field force is
/// `gamma (x - m_x(t))` evaluated at the pre-step time.
pub fn mckean_linear_step(
    copies: &mut ParticleState,
    path: &LinearMeanPath,
    field: &ForceField,
    dt: f64,
    noise: &NoiseStream,
    lane: NoiseLane,
    work: &mut Workspace,
) -> Result<(), DynamicsError> {
    if !matches!(field.kind, FieldKind::Linear) {
        return Err(DynamicsError::FieldKindMismatch { expected: "linear" });
    }
    let (mx, _) = path.mean_at(copies.t);
    let mf = MeanField::linear_mean(field.coeffs.gamma, mx);
    super::step_with_mean_field(copies, field, &mf, dt, noise, lane, work)
}

/// Advances N independent copies of the nonlinear process (linear-field
/// reduction), sharing noise addresses with a companion particle system
/// advanced on the same lane.
pub fn advance_mckean_linear(
    copies: &mut ParticleState,
    path: &LinearMeanPath,
    field: &ForceField,
    dt: f64,
    n_steps: u64,
    noise: &NoiseStream,
    lane: NoiseLane,
    recorder: &mut dyn Recorder,
) -> Result<(), DynamicsError> {
    let mut work = Workspace::new(copies.n, copies.dim);
    let stride = recorder.stride();
    if copies.step == 0 {
        recorder.record(copies);
    }
    for _ in 0..n_steps {
        mckean_linear_step(copies, path, field, dt, noise, lane, &mut work)?;
        if copies.step % stride == 0 {
            recorder.record(copies);
        }
    }
    Ok(())
}

/// Monte Carlo error budget of an M-particle proxy for the limiting law.
pub fn proxy_error_budget(m: usize) -> f64 {
    1.0 / (m as f64).sqrt()
}

/// Advances the auxiliary cloud that stands in for the limiting law: the
/// cloud is itself an interacting M-particle system, so this is exactly
/// [`advance`] on the given lane (with `M = N` it degenerates to the
/// particle system). Keep the lane distinct from the primary system's so
/// the proxy randomness stays independent.
pub fn advance_mckean_proxy(
    cloud: &mut ParticleState,
    field: &ForceField,
    dt: f64,
    n_steps: u64,
    noise: &NoiseStream,
    lane: NoiseLane,
    recorder: &mut dyn Recorder,
) -> Result<(), DynamicsError> {
    advance(cloud, field, dt, n_steps, noise, lane, recorder)
}
