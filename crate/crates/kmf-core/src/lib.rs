//! Kinetic mean-field toolkit.
//!
//! Simulation and verification machinery for the kinetic equation
//!
//! ```text
//! dX_t = V_t dt
//! dV_t = -A(V_t) dt - B(X_t) dt - (C * rho_t)(X_t) dt + sqrt(2) dW_t
//! ```
//!
//! where `A` is a friction force, `B = beta x + D` a confinement force and
//! `C` a small Lipschitz interaction kernel acting through the spatial
//! marginal `rho_t`. The crate provides:
//!
//! * [`model`]: coefficient bundles and concrete force fields, with
//!   Monte Carlo validation of the declared Lipschitz/monotonicity
//!   constants;
//! * [`rates`]: every explicit constant of the contraction argument:
//!   the smallness threshold `eta0`, admissible Lyapunov parameters, the
//!   quadratic form `Q`, decay rates and metric-equivalence constants;
//! * [`dynamics`]: Euler–Maruyama engines for the N-particle system,
//!   synchronous couplings, and exact or proxy integrators for the
//!   limiting nonlinear process;
//! * [`transport`]: empirical Wasserstein-2 distances (exact assignment
//!   and log-domain entropic), the anisotropic `Q`-metric and moment
//!   utilities;
//! * [`experiments`]: drivers that turn the trend-to-equilibrium,
//!   propagation-of-chaos and Gaussian-deviation statements into
//!   desk-scale pass/fail measurements;
//! * [`noise`]: counter-based Gaussian streams so that every run is
//!   bit-reproducible and coupled systems share increments by
//!   construction.

pub mod dynamics;
pub mod experiments;
pub mod model;
pub mod noise;
pub mod rates;
pub mod stats;
pub mod transport;

pub use dynamics::{CoupledPair, NoiseLane, ParticleState};
pub use model::{Coefficients, FieldKind, ForceField, PhasePoint};
pub use noise::{NoiseStream, StreamClass};
pub use rates::{QForm, RateReport, SearchMode, Variant};
pub use transport::{GroundMetric, PointCloud};
