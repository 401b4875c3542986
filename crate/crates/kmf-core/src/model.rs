//! Coefficient bundles and concrete force fields.
//!
//! A force field consists of a friction force `A(v)`, a confinement force
//! `B(x) = beta x + D(x)` and an odd interaction kernel `C(z)`, together
//! with declared constants
//!
//! ```text
//! |A(v) - A(w)|        <= alpha  |v - w|
//! (v-w).(A(v) - A(w))  >= alpha' |v - w|^2
//! |D(x) - D(y)|        <= delta  |x - y|
//! |C(x) - C(y)|        <= gamma  |x - y|
//! ```
//!
//! Two built-ins ship with the crate: `linear` (exactly solvable, used as
//! an oracle throughout the test suite) and `sinusoidal` (genuinely
//! nonlinear with tight constants). Custom fields carry user closures with
//! user-declared constants; [`validate_constants`] checks declarations by
//! sampling.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::noise::{NoiseStream, StreamClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("monotonicity constant alpha' = {alpha_prime} exceeds Lipschitz constant alpha = {alpha}")]
    AlphaPrimeExceedsAlpha { alpha: f64, alpha_prime: f64 },
    #[error("coefficient {name} = {value} must be finite and nonnegative")]
    InvalidCoefficient { name: &'static str, value: f64 },
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("non-finite input in {0}")]
    NonFiniteInput(&'static str),
    #[error("declared constants violated: {0}")]
    ConstantsViolated(String),
}

/// The five assumption constants plus the ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub dim: usize,
}

impl Coefficients {
    pub fn new(
        alpha: f64,
        alpha_prime: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
        dim: usize,
    ) -> Result<Self, ModelError> {
        for (name, value) in [
            ("alpha", alpha),
            ("alpha_prime", alpha_prime),
            ("beta", beta),
            ("gamma", gamma),
            ("delta", delta),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidCoefficient { name, value });
            }
        }
        // Cauchy-Schwarz forces alpha' <= alpha for any map A.
        if alpha_prime > alpha {
            return Err(ModelError::AlphaPrimeExceedsAlpha { alpha, alpha_prime });
        }
        if dim == 0 {
            return Err(ModelError::ZeroDim);
        }
        Ok(Self {
            alpha,
            alpha_prime,
            beta,
            gamma,
            delta,
            dim,
        })
    }

    /// Interaction-plus-confinement perturbation size `eta = gamma + delta`.
    pub fn eta(&self) -> f64 {
        self.gamma + self.delta
    }
}

/// User-supplied maps for a custom field. Each closure fills `out` (length
/// `dim`) from the input of the same length.
#[derive(Clone)]
pub struct CustomMaps {
    pub friction: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub confinement_perturbation: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub interaction: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

#[derive(Clone)]
pub enum FieldKind {
    /// `A(v) = alpha' v`, `D = 0`, `C(z) = gamma z`.
    Linear,
    /// `A(v) = alpha v`, `D(z) = delta sin(z)`, `C(z) = gamma sin(z)`,
    /// componentwise.
    Sinusoidal,
    Custom(CustomMaps),
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Linear => f.write_str("Linear"),
            FieldKind::Sinusoidal => f.write_str("Sinusoidal"),
            FieldKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// One point of phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(x.len(), v.len(), "position/velocity dimension mismatch");
        Self { x, v }
    }
}

/// An evaluable drift triple with declared constants.
#[derive(Debug, Clone)]
pub struct ForceField {
    pub kind: FieldKind,
    pub coeffs: Coefficients,
}

/// Builds a force field after checking the coefficient invariants.
pub fn make_field(kind: FieldKind, coeffs: Coefficients) -> Result<ForceField, ModelError> {
    // Re-run the bundle checks: callers may have constructed Coefficients
    // directly.
    let coeffs = Coefficients::new(
        coeffs.alpha,
        coeffs.alpha_prime,
        coeffs.beta,
        coeffs.gamma,
        coeffs.delta,
        coeffs.dim,
    )?;
    Ok(ForceField { kind, coeffs })
}

impl ForceField {
    pub fn dim(&self) -> usize {
        self.coeffs.dim
    }

    /// Friction force `A(v)`.
    pub fn friction(&self, v: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Linear => {
                let a = self.coeffs.alpha_prime;
                for (o, vi) in out.iter_mut().zip(v) {
                    *o = a * vi;
                }
            }
            FieldKind::Sinusoidal => {
                let a = self.coeffs.alpha;
                for (o, vi) in out.iter_mut().zip(v) {
                    *o = a * vi;
                }
            }
            FieldKind::Custom(maps) => (maps.friction)(v, out),
        }
    }

    /// Confinement perturbation `D(x)`.
    pub fn confinement_perturbation(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Linear => out.fill(0.0),
            FieldKind::Sinusoidal => {
                let d = self.coeffs.delta;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = d * xi.sin();
                }
            }
            FieldKind::Custom(maps) => (maps.confinement_perturbation)(x, out),
        }
    }

    /// Full confinement force `B(x) = beta x + D(x)`.
    pub fn confinement(&self, x: &[f64], out: &mut [f64]) {
        self.confinement_perturbation(x, out);
        let beta = self.coeffs.beta;
        for (o, xi) in out.iter_mut().zip(x) {
            *o += beta * xi;
        }
    }

    /// Interaction kernel `C(z)`.
    pub fn interaction(&self, z: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Linear => {
                let g = self.coeffs.gamma;
                for (o, zi) in out.iter_mut().zip(z) {
                    *o = g * zi;
                }
            }
            FieldKind::Sinusoidal => {
                let g = self.coeffs.gamma;
                for (o, zi) in out.iter_mut().zip(z) {
                    *o = g * zi.sin();
                }
            }
            FieldKind::Custom(maps) => (maps.interaction)(z, out),
        }
    }
}

/// Velocity drift `-A(v) - B(x) - mean_force` at one phase point. The
/// position drift is always `v` by construction and has no operation.
pub fn drift(field: &ForceField, p: &PhasePoint, mean_force: &[f64]) -> Result<Vec<f64>, ModelError> {
    if p.x.iter().chain(&p.v).any(|c| !c.is_finite()) {
        return Err(ModelError::NonFiniteInput("phase point"));
    }
    if mean_force.iter().any(|c| !c.is_finite()) {
        return Err(ModelError::NonFiniteInput("mean force"));
    }
    let d = p.x.len();
    let mut fr = vec![0.0; d];
    let mut bf = vec![0.0; d];
    field.friction(&p.v, &mut fr);
    field.confinement(&p.x, &mut bf);
    Ok((0..d).map(|k| -fr[k] - bf[k] - mean_force[k]).collect())
}

/// Which declared constant a sampled ratio contradicts.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstantViolation {
    FrictionLipschitz { declared: f64, observed: f64 },
    FrictionMonotonicity { declared: f64, observed: f64 },
    ConfinementLipschitz { declared: f64, observed: f64 },
    InteractionLipschitz { declared: f64, observed: f64 },
}

impl fmt::Display for ConstantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstantViolation::FrictionLipschitz { declared, observed } => {
                write!(f, "friction Lipschitz: declared {declared}, observed {observed}")
            }
            ConstantViolation::FrictionMonotonicity { declared, observed } => {
                write!(f, "friction monotonicity: declared {declared}, observed {observed}")
            }
            ConstantViolation::ConfinementLipschitz { declared, observed } => {
                write!(f, "confinement perturbation Lipschitz: declared {declared}, observed {observed}")
            }
            ConstantViolation::InteractionLipschitz { declared, observed } => {
                write!(f, "interaction Lipschitz: declared {declared}, observed {observed}")
            }
        }
    }
}

/// Observed constants over sampled pairs, with any declaration violations.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub observed_alpha: f64,
    pub observed_alpha_prime: f64,
    pub observed_delta: f64,
    pub observed_gamma: f64,
    pub violations: Vec<ConstantViolation>,
}

impl ValidationReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

const VALIDATION_SLACK: f64 = 1e-9;

/// Monte Carlo check of the four assumption inequalities over random pairs.
///
/// Reports the extremal observed ratios and flags declarations violated by
/// more than `1e-9`: a Lipschitz declaration is violated when some sampled
/// ratio exceeds it, the monotonicity declaration when some sampled ratio
/// falls below it. Report-only; rate computations reject violating fields.
pub fn validate_constants(field: &ForceField, sample_count: usize, rng_seed: u64) -> ValidationReport {
    assert!(sample_count >= 2, "need at least two sample pairs");
    let d = field.dim();
    let noise = NoiseStream::new(rng_seed);
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d];
    let mut fp = vec![0.0; d];
    let mut fq = vec![0.0; d];

    let mut obs_alpha = 0.0f64;
    let mut obs_alpha_prime = f64::INFINITY;
    let mut obs_delta = 0.0f64;
    let mut obs_gamma = 0.0f64;

    for s in 0..sample_count as u64 {
        // Mix unit-scale and wide pairs so nonlinearity away from the
        // origin is probed as well.
        let scale = if s % 3 == 2 { 5.0 } else { 1.0 };
        for k in 0..d {
            p[k] = scale * noise.normal(StreamClass::Validation, 0, s, 0, k as u64);
            q[k] = scale * noise.normal(StreamClass::Validation, 1, s, 0, k as u64);
        }
        let dist2: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist2 < 1e-24 {
            continue;
        }
        let dist = dist2.sqrt();

        field.friction(&p, &mut fp);
        field.friction(&q, &mut fq);
        let df: f64 = fp.iter().zip(&fq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let inner: f64 = (0..d).map(|k| (p[k] - q[k]) * (fp[k] - fq[k])).sum();
        obs_alpha = obs_alpha.max(df / dist);
        obs_alpha_prime = obs_alpha_prime.min(inner / dist2);

        field.confinement_perturbation(&p, &mut fp);
        field.confinement_perturbation(&q, &mut fq);
        let dd: f64 = fp.iter().zip(&fq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        obs_delta = obs_delta.max(dd / dist);

        field.interaction(&p, &mut fp);
        field.interaction(&q, &mut fq);
        let dc: f64 = fp.iter().zip(&fq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        obs_gamma = obs_gamma.max(dc / dist);
    }

    let c = &field.coeffs;
    let mut violations = Vec::new();
    if obs_alpha > c.alpha + VALIDATION_SLACK {
        violations.push(ConstantViolation::FrictionLipschitz {
            declared: c.alpha,
            observed: obs_alpha,
        });
    }
    if obs_alpha_prime < c.alpha_prime - VALIDATION_SLACK {
        violations.push(ConstantViolation::FrictionMonotonicity {
            declared: c.alpha_prime,
            observed: obs_alpha_prime,
        });
    }
    if obs_delta > c.delta + VALIDATION_SLACK {
        violations.push(ConstantViolation::ConfinementLipschitz {
            declared: c.delta,
            observed: obs_delta,
        });
    }
    if obs_gamma > c.gamma + VALIDATION_SLACK {
        violations.push(ConstantViolation::InteractionLipschitz {
            declared: c.gamma,
            observed: obs_gamma,
        });
    }

    ValidationReport {
        observed_alpha: obs_alpha,
        observed_alpha_prime: obs_alpha_prime,
        observed_delta: obs_delta,
        observed_gamma: obs_gamma,
        violations,
    }
}

/// Validates and rejects a field whose declared constants are contradicted
/// by sampling. Used as a preflight by everything that feeds declared
/// constants into rate computations.
pub fn check_declared_constants(field: &ForceField, sample_count: usize, rng_seed: u64) -> Result<ValidationReport, ModelError> {
    let report = validate_constants(field, sample_count, rng_seed);
    if report.is_consistent() {
        Ok(report)
    } else {
        let detail = report
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        Err(ModelError::ConstantsViolated(detail))
    }
}
