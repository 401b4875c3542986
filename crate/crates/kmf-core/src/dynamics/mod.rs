//! Time-stepping engines for the interacting particle system and its
//! couplings.
//!
//! The N-particle system
//!
//! ```text
//! dX^i = V^i dt
//! dV^i = -A(V^i) dt - B(X^i) dt - (1/N) sum_j C(X^i - X^j) dt + sqrt(2) dW^i
//! ```
//!
//! is advanced by explicit Euler–Maruyama (the noise is additive, so no
//! Milstein correction exists). All Brownian increments are content-
//! addressed through a [`NoiseStream`]: two systems advanced with the same
//! [`NoiseLane`] consume identical increments by construction, which is
//! precisely the synchronous coupling of the contraction and chaos
//! arguments.
//!
//! Mean-field forces are evaluated through a per-step [`MeanField`]
//! summary: linear kernels reduce to a centered difference against the
//! cloud mean, sinusoidal kernels to first trigonometric moments, custom
//! kernels fall back to the definitional O(N^2) pairwise sum. All
//! cross-particle reductions use fixed chunk boundaries so results are
//! independent of scheduling and thread count.

mod mckean;

pub use mckean::{
    advance_mckean_linear, advance_mckean_proxy, mckean_linear_step, proxy_error_budget,
    LinearMeanPath,
};

use thiserror::Error;

use crate::model::{FieldKind, ForceField};
use crate::noise::{NoiseStream, StreamClass};
use crate::rates::QForm;
use crate::stats::REDUCTION_CHUNK;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("stability guard violated: dt * (alpha + beta + gamma + delta) = {budget} must stay below 0.5")]
    StabilityGuard { dt: f64, budget: f64 },
    #[error("non-finite state detected at step {step} (blow-up)")]
    NonFinite { step: u64 },
    #[error("state size mismatch: {0}")]
    SizeMismatch(&'static str),
    #[error("operation requires a {expected} field")]
    FieldKindMismatch { expected: &'static str },
}

/// N phase-space points advanced in lockstep.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub n: usize,
    pub dim: usize,
    /// Row-major N x dim positions.
    pub x: Vec<f64>,
    /// Row-major N x dim velocities.
    pub v: Vec<f64>,
    /// Global step counter; also the step coordinate of noise addresses.
    pub step: u64,
    pub t: f64,
}

impl ParticleState {
    pub fn zeros(n: usize, dim: usize) -> Self {
        assert!(n >= 1 && dim >= 1);
        Self {
            n,
            dim,
            x: vec![0.0; n * dim],
            v: vec![0.0; n * dim],
            step: 0,
            t: 0.0,
        }
    }

    /// All particles at one deterministic phase point.
    pub fn dirac(n: usize, x0: &[f64], v0: &[f64]) -> Self {
        let dim = x0.len();
        assert_eq!(dim, v0.len());
        let mut s = Self::zeros(n, dim);
        for i in 0..n {
            s.x[i * dim..(i + 1) * dim].copy_from_slice(x0);
            s.v[i * dim..(i + 1) * dim].copy_from_slice(v0);
        }
        s
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).all(|c| c.is_finite())
    }

    /// Per-coordinate means of a row-major array, reduced with fixed chunk
    /// boundaries.
    fn column_means(data: &[f64], n: usize, dim: usize) -> Vec<f64> {
        let mut total = vec![0.0; dim];
        let mut chunk_acc = vec![0.0; dim];
        for chunk in data.chunks(REDUCTION_CHUNK * dim) {
            chunk_acc.fill(0.0);
            for row in chunk.chunks_exact(dim) {
                for (a, r) in chunk_acc.iter_mut().zip(row) {
                    *a += r;
                }
            }
            for (t, a) in total.iter_mut().zip(&chunk_acc) {
                *t += a;
            }
        }
        for t in &mut total {
            *t /= n as f64;
        }
        total
    }

    pub fn mean_position(&self) -> Vec<f64> {
        Self::column_means(&self.x, self.n, self.dim)
    }

    pub fn mean_velocity(&self) -> Vec<f64> {
        Self::column_means(&self.v, self.n, self.dim)
    }
}

/// Chunked mean over particles of the squared norm of each row.
pub fn mean_square_norm(data: &[f64], dim: usize) -> f64 {
    let n = data.len() / dim;
    let mut total = 0.0;
    for chunk in data.chunks(REDUCTION_CHUNK * dim) {
        let mut acc = 0.0;
        for c in chunk {
            acc += c * c;
        }
        total += acc;
    }
    total / n as f64
}

/// Identifies which noise sub-stream a system consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseLane {
    pub class: StreamClass,
    pub replica: u64,
}

impl NoiseLane {
    pub fn dynamics(replica: u64) -> Self {
        Self {
            class: StreamClass::Dynamics,
            replica,
        }
    }

    pub fn proxy(replica: u64) -> Self {
        Self {
            class: StreamClass::ProxyCloud,
            replica,
        }
    }
}

/// Scratch for the definitional pairwise kernel sum.
pub struct PairScratch {
    z: Vec<f64>,
    c: Vec<f64>,
}

impl PairScratch {
    pub fn new(dim: usize) -> Self {
        Self {
            z: vec![0.0; dim],
            c: vec![0.0; dim],
        }
    }
}

/// Scratch buffers reused across steps.
pub struct Workspace {
    force: Vec<f64>,
    fr: Vec<f64>,
    bf: Vec<f64>,
    pair: PairScratch,
}

impl Workspace {
    pub fn new(n: usize, dim: usize) -> Self {
        Self {
            force: vec![0.0; n * dim],
            fr: vec![0.0; dim],
            bf: vec![0.0; dim],
            pair: PairScratch::new(dim),
        }
    }

    fn ensure(&mut self, n: usize, dim: usize) {
        if self.force.len() < n * dim {
            self.force.resize(n * dim, 0.0);
        }
    }
}

enum Summary<'a> {
    Zero,
    /// Linear kernel: force is `gamma (x - mean)`.
    LinearMean { gamma: f64, mean: Vec<f64> },
    /// Sinusoidal kernel: `gamma (sin x_k mc_k - cos x_k ms_k)` per
    /// coordinate, from the sin/cos first moments of the cloud.
    SinMoments { gamma: f64, mc: Vec<f64>, ms: Vec<f64> },
    /// Definitional pairwise sum against the cloud.
    Full { positions: &'a [f64], n: usize },
}

/// Per-step summary of the mean-field force generated by a cloud of
/// positions. The summary of a state's own positions yields the particle
/// system's interaction term; the summary of an auxiliary cloud yields the
/// force felt by nonlinear-process copies.
pub struct MeanField<'a> {
    inner: Summary<'a>,
}

impl<'a> MeanField<'a> {
    pub fn of_cloud(field: &ForceField, positions: &'a [f64], n: usize) -> Self {
        let dim = field.dim();
        let gamma = field.coeffs.gamma;
        let inner = match &field.kind {
            FieldKind::Linear | FieldKind::Sinusoidal if gamma == 0.0 => Summary::Zero,
            FieldKind::Linear => Summary::LinearMean {
                gamma,
                mean: ParticleState::column_means(positions, n, dim),
            },
            FieldKind::Sinusoidal => {
                let mut mc = vec![0.0; dim];
                let mut ms = vec![0.0; dim];
                let mut acc_c = vec![0.0; dim];
                let mut acc_s = vec![0.0; dim];
                for chunk in positions.chunks(REDUCTION_CHUNK * dim) {
                    acc_c.fill(0.0);
                    acc_s.fill(0.0);
                    for row in chunk.chunks_exact(dim) {
                        for k in 0..dim {
                            let (s, c) = row[k].sin_cos();
                            acc_c[k] += c;
                            acc_s[k] += s;
                        }
                    }
                    for k in 0..dim {
                        mc[k] += acc_c[k];
                        ms[k] += acc_s[k];
                    }
                }
                for k in 0..dim {
                    mc[k] /= n as f64;
                    ms[k] /= n as f64;
                }
                Summary::SinMoments { gamma, mc, ms }
            }
            FieldKind::Custom(_) => Summary::Full { positions, n },
        };
        Self { inner }
    }

    /// Force of an exactly-known law with spatial mean `mean`: valid for
    /// linear kernels, where `C * rho(x) = gamma (x - mean)`.
    pub fn linear_mean(gamma: f64, mean: Vec<f64>) -> Self {
        Self {
            inner: Summary::LinearMean { gamma, mean },
        }
    }

    /// Mean-field force at position `xi`.
    pub fn force_at(&self, field: &ForceField, xi: &[f64], out: &mut [f64], scratch: &mut PairScratch) {
        match &self.inner {
            Summary::Zero => out.fill(0.0),
            Summary::LinearMean { gamma, mean } => {
                for k in 0..xi.len() {
                    out[k] = gamma * (xi[k] - mean[k]);
                }
            }
            Summary::SinMoments { gamma, mc, ms } => {
                // sin(a - b) = sin a cos b - cos a sin b, averaged over b
                for k in 0..xi.len() {
                    let (s, c) = xi[k].sin_cos();
                    out[k] = gamma * (s * mc[k] - c * ms[k]);
                }
            }
            Summary::Full { positions, n } => {
                let dim = xi.len();
                out.fill(0.0);
                for j in 0..*n {
                    for k in 0..dim {
                        scratch.z[k] = xi[k] - positions[j * dim + k];
                    }
                    field.interaction(&scratch.z, &mut scratch.c);
                    for k in 0..dim {
                        out[k] += scratch.c[k];
                    }
                }
                let inv = 1.0 / *n as f64;
                for o in out.iter_mut() {
                    *o *= inv;
                }
            }
        }
    }
}

/// Empirical mean-field force on particle `i`: `(1/N) sum_j C(x_i - x_j)`,
/// accumulated in fixed index order. This is the definitional form; the
/// stepping loop uses the per-kind fast paths of [`MeanField`], which agree
/// with it to roundoff.
pub fn interaction_force(field: &ForceField, positions: &[f64], n: usize, i: usize) -> Vec<f64> {
    let dim = field.dim();
    let mut out = vec![0.0; dim];
    let mut scratch = PairScratch::new(dim);
    let xi: Vec<f64> = positions[i * dim..(i + 1) * dim].to_vec();
    for j in 0..n {
        for k in 0..dim {
            scratch.z[k] = xi[k] - positions[j * dim + k];
        }
        field.interaction(&scratch.z, &mut scratch.c);
        for k in 0..dim {
            out[k] += scratch.c[k];
        }
    }
    for o in &mut out {
        *o /= n as f64;
    }
    out
}

/// Batch mean-field forces for a whole cloud (fast per-kind paths).
pub fn mean_field_forces(field: &ForceField, positions: &[f64], n: usize, out: &mut [f64]) {
    let dim = field.dim();
    let mf = MeanField::of_cloud(field, positions, n);
    let mut scratch = PairScratch::new(dim);
    for (i, oi) in out.chunks_exact_mut(dim).take(n).enumerate() {
        let xi = &positions[i * dim..(i + 1) * dim];
        mf.force_at(field, xi, oi, &mut scratch);
    }
}

fn check_guard(field: &ForceField, dt: f64) -> Result<(), DynamicsError> {
    let c = &field.coeffs;
    let budget = dt * (c.alpha + c.beta + c.gamma + c.delta);
    if !(dt > 0.0) || budget >= 0.5 {
        return Err(DynamicsError::StabilityGuard { dt, budget });
    }
    Ok(())
}

/// Advances the state by one step. Returns the blow-up step on non-finite
/// results.
pub fn step(
    state: &mut ParticleState,
    field: &ForceField,
    dt: f64,
    noise: &NoiseStream,
    lane: NoiseLane,
) -> Result<(), DynamicsError> {
    let mut work = Workspace::new(state.n, state.dim);
    step_buffered(state, field, dt, noise, lane, &mut work)
}

/// [`step`] with caller-provided scratch space; use inside loops.
pub fn step_buffered(
    state: &mut ParticleState,
    field: &ForceField,
    dt: f64,
    noise: &NoiseStream,
    lane: NoiseLane,
    work: &mut Workspace,
) -> Result<(), DynamicsError> {
    check_guard(field, dt)?;
    let (n, dim) = (state.n, state.dim);
    work.ensure(n, dim);

    // Phase 1: all mean-field forces from the pre-step positions.
    {
        let mf = MeanField::of_cloud(field, &state.x, n);
        let force = &mut work.force;
        let pair = &mut work.pair;
        for (i, oi) in force.chunks_exact_mut(dim).take(n).enumerate() {
            let xi = &state.x[i * dim..(i + 1) * dim];
            mf.force_at(field, xi, oi, pair);
        }
    }

    step_with_forces(state, field, dt, noise, lane, work)
}

/// Phase 2 of a step: explicit update from pre-step values, with the
/// velocity forces already in `work.force`.
fn step_with_forces(
    state: &mut ParticleState,
    field: &ForceField,
    dt: f64,
    noise: &NoiseStream,
    lane: NoiseLane,
    work: &mut Workspace,
) -> Result<(), DynamicsError> {
    let (n, dim) = (state.n, state.dim);
    let sig = (2.0 * dt).sqrt();
    let step_idx = state.step;
    for i in 0..n {
        let base = i * dim;
        {
            let vi = &state.v[base..base + dim];
            field.friction(vi, &mut work.fr);
        }
        {
            let xi = &state.x[base..base + dim];
            field.confinement(xi, &mut work.bf);
        }
        for k in 0..dim {
            let xv = state.x[base + k];
            let vv = state.v[base + k];
            let acc = -work.fr[k] - work.bf[k] - work.force[base + k];
            let z = noise.normal(lane.class, lane.replica, i as u64, step_idx, k as u64);
            let new_x = xv + vv * dt;
            let new_v = vv + acc * dt + sig * z;
            if !(new_x.is_finite() && new_v.is_finite()) {
                return Err(DynamicsError::NonFinite { step: step_idx });
            }
            state.x[base + k] = new_x;
            state.v[base + k] = new_v;
        }
    }
    state.step += 1;
    state.t += dt;
    Ok(())
}

/// Steps a cloud whose mean-field force comes from a caller-supplied
/// summary instead of its own empirical measure. Used by the nonlinear
/// (McKean) process integrators.
pub(crate) fn step_with_mean_field(
    state: &mut ParticleState,
    field: &ForceField,
    mf: &MeanField<'_>,
    dt: f64,
    noise: &NoiseStream,
    lane: NoiseLane,
    work: &mut Workspace,
) -> Result<(), DynamicsError> {
    check_guard(field, dt)?;
    let (n, dim) = (state.n, state.dim);
    work.ensure(n, dim);
    {
        let force = &mut work.force;
        let pair = &mut work.pair;
        for (i, oi) in force.chunks_exact_mut(dim).take(n).enumerate() {
            let xi = &state.x[i * dim..(i + 1) * dim];
            mf.force_at(field, xi, oi, pair);
        }
    }
    step_with_forces(state, field, dt, noise, lane, work)
}

/// Receives states at a configured stride during [`advance`].
pub trait Recorder {
    fn stride(&self) -> u64;
    fn record(&mut self, state: &ParticleState);
}

/// Discards everything.
pub struct NullRecorder;

impl Recorder for NullRecorder {
    fn stride(&self) -> u64 {
        u64::MAX
    }
    fn record(&mut self, _state: &ParticleState) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub step: u64,
    pub t: f64,
    pub m2_x: f64,
    pub m2_v: f64,
    pub mean_x: Vec<f64>,
    pub mean_v: Vec<f64>,
}

/// Records second moments and means of the state.
pub struct MomentRecorder {
    stride: u64,
    pub rows: Vec<MomentRow>,
}

impl MomentRecorder {
    pub fn new(stride: u64) -> Self {
        Self {
            stride: stride.max(1),
            rows: Vec::new(),
        }
    }
}

impl Recorder for MomentRecorder {
    fn stride(&self) -> u64 {
        self.stride
    }

    fn record(&mut self, state: &ParticleState) {
        self.rows.push(MomentRow {
            step: state.step,
            t: state.t,
            m2_x: mean_square_norm(&state.x, state.dim),
            m2_v: mean_square_norm(&state.v, state.dim),
            mean_x: state.mean_position(),
            mean_v: state.mean_velocity(),
        });
    }
}

/// Advances `n_steps` steps, recording at every multiple of the recorder's
/// stride. Step counters are global, so splitting a run over several calls
/// changes neither the trajectory nor the recorded rows.
pub fn advance(
    state: &mut ParticleState,
    field: &ForceField,
    dt: f64,
    n_steps: u64,
    noise: &NoiseStream,
    lane: NoiseLane,
    recorder: &mut dyn Recorder,
) -> Result<(), DynamicsError> {
    let mut work = Workspace::new(state.n, state.dim);
    let stride = recorder.stride();
    if state.step == 0 {
        recorder.record(state);
    }
    for _ in 0..n_steps {
        step_buffered(state, field, dt, noise, lane, &mut work)?;
        if state.step % stride == 0 {
            recorder.record(state);
        }
    }
    Ok(())
}

/// Two equal-size systems advanced with one shared noise stream.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub a: ParticleState,
    pub b: ParticleState,
}

impl CoupledPair {
    pub fn new(a: ParticleState, b: ParticleState) -> Result<Self, DynamicsError> {
        if a.n != b.n || a.dim != b.dim {
            return Err(DynamicsError::SizeMismatch(
                "coupled states must have equal shape",
            ));
        }
        if a.step != b.step {
            return Err(DynamicsError::SizeMismatch(
                "coupled states must share the step counter",
            ));
        }
        Ok(Self { a, b })
    }

    /// Difference moments `(E|x|^2, E x.v, E|v|^2)` over particles.
    pub fn difference_moments(&self) -> (f64, f64, f64) {
        let dim = self.a.dim;
        let n = self.a.n;
        let mut x2 = 0.0;
        let mut xv = 0.0;
        let mut v2 = 0.0;
        let chunk = REDUCTION_CHUNK * dim;
        let mut idx = 0;
        while idx < n * dim {
            let end = (idx + chunk).min(n * dim);
            let mut ax2 = 0.0;
            let mut axv = 0.0;
            let mut av2 = 0.0;
            for j in idx..end {
                let dx = self.a.x[j] - self.b.x[j];
                let dv = self.a.v[j] - self.b.v[j];
                ax2 += dx * dx;
                axv += dx * dv;
                av2 += dv * dv;
            }
            x2 += ax2;
            xv += axv;
            v2 += av2;
            idx = end;
        }
        let nf = n as f64;
        (x2 / nf, xv / nf, v2 / nf)
    }
}

/// One row of the coupled decay record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub step: u64,
    pub t: f64,
    pub x2: f64,
    pub xv: f64,
    pub v2: f64,
    pub q: f64,
}

/// Advances both members with identical noise addresses and records the
/// particle-averaged difference moments and `Q` at the given stride.
pub fn advance_coupled(
    pair: &mut CoupledPair,
    field: &ForceField,
    dt: f64,
    n_steps: u64,
    noise: &NoiseStream,
    lane: NoiseLane,
    q: &QForm,
    stride: u64,
) -> Result<Vec<DecayRow>, DynamicsError> {
    if pair.a.step != pair.b.step {
        return Err(DynamicsError::SizeMismatch(
            "coupled states must share the step counter",
        ));
    }
    let stride = stride.max(1);
    let mut rows = Vec::new();
    let mut work_a = Workspace::new(pair.a.n, pair.a.dim);
    let mut work_b = Workspace::new(pair.b.n, pair.b.dim);
    fn push(pair: &CoupledPair, q: &QForm, rows: &mut Vec<DecayRow>) {
        let (x2, xv, v2) = pair.difference_moments();
        rows.push(DecayRow {
            step: pair.a.step,
            t: pair.a.t,
            x2,
            xv,
            v2,
            q: q.from_moments(x2, xv, v2),
        });
    }
    if pair.a.step == 0 {
        push(pair, q, &mut rows);
    }
    for _ in 0..n_steps {
        step_buffered(&mut pair.a, field, dt, noise, lane, &mut work_a)?;
        step_buffered(&mut pair.b, field, dt, noise, lane, &mut work_b)?;
        if pair.a.step % stride == 0 {
            push(pair, q, &mut rows);
        }
    }
    Ok(rows)
}
