//! Explicit constants of the contraction argument.
//!
//! The coupling proof perturbs the Euclidean metric on phase space by the
//! quadratic form
//!
//! ```text
//! Q(x, v) = b beta |x|^2 + 2 x.v + b |v|^2,
//! ```
//!
//! positive definite iff `b > 1/sqrt(beta)`, and derives a differential
//! inequality `d/dt E Q <= -c1 E|x|^2 - c2 E|v|^2` whose coefficients
//! depend on `(b, eps)` and on the perturbation size `eta = gamma + delta`.
//! This module computes the admissibility threshold `eta0`, the admissible
//! `b`-interval, the decay rate obtained from the dissipation pair, and the
//! equivalence constants between `Q` and the Euclidean norm.
//!
//! Two dissipation budgets appear, differing only in the friction constant
//! fed to the Young inequality: the contraction argument uses `alpha`, the
//! moment-bound and chaos arguments use `2 alpha` (variant
//! [`Variant::DoubledAlpha`]).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatesError {
    #[error("coefficient {name} = {value} must be positive")]
    NonpositiveCoefficient { name: &'static str, value: f64 },
    #[error("eta = {eta} is not admissible: threshold eta0 = {eta0}")]
    EtaOutOfRange { eta: f64, eta0: f64 },
    #[error("empty admissible b-interval ({lo}, {hi}); eta/eps outside the admissible region")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("quadratic form with b = {b}, beta = {beta} is not positive definite")]
    DegenerateForm { b: f64, beta: f64 },
}

/// Which dissipation budget is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Two-solution coupling: friction enters through `alpha`.
    Contraction,
    /// Moment bound / particle coupling: friction enters through `2 alpha`.
    DoubledAlpha,
}

impl Variant {
    fn alpha_k(self, alpha: f64) -> f64 {
        match self {
            Variant::Contraction => alpha,
            Variant::DoubledAlpha => 2.0 * alpha,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Contraction => "contraction",
            Variant::DoubledAlpha => "doubled_alpha",
        }
    }
}

/// How the Lyapunov parameters are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Fix `eps = beta` and optimize the two-step bound
    /// `min(c1, c2)/lambda_max(Q)` over `b`. In the unit case this lands
    /// at rate `1/3` with `(b, eps) = (2, 1)`, and at `0.2667` for
    /// `eta = 0.1`.
    TwoStep,
    /// Scan `(b, eps)` and take the sharpest `C` with
    /// `diag(c1, c2) - C Q >= 0` (2x2 determinant condition).
    FullLmi,
}

impl SearchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchMode::TwoStep => "two_step",
            SearchMode::FullLmi => "full_lmi",
        }
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<(), RatesError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(RatesError::NonpositiveCoefficient { name, value });
    }
    Ok(())
}

/// Smallness threshold on `eta = gamma + delta`.
///
/// Smaller positive root of
/// `2 eta^2 - eta (2 + alpha_k^2/beta + beta + 4 alpha') + 2 alpha' beta`,
/// capped by `beta sqrt(beta) / (1 + 2 sqrt(beta))` so that the admissible
/// `b`-interval stays nonempty together with positive definiteness.
pub fn eta0(alpha: f64, alpha_prime: f64, beta: f64, variant: Variant) -> Result<f64, RatesError> {
    require_positive("alpha_prime", alpha_prime)?;
    require_positive("beta", beta)?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(RatesError::NonpositiveCoefficient {
            name: "alpha",
            value: alpha,
        });
    }
    let ak = variant.alpha_k(alpha);
    let s = 2.0 + ak * ak / beta + beta + 4.0 * alpha_prime;
    // s^2 >= 16 alpha' beta always (AM-GM), so the root is real.
    let root = (s - (s * s - 16.0 * alpha_prime * beta).sqrt()) / 4.0;
    let sq = beta.sqrt();
    let cap = beta * sq / (1.0 + 2.0 * sq);
    Ok(root.min(cap))
}

/// Open interval of admissible Lyapunov parameters `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BInterval {
    pub lo: f64,
    /// `f64::INFINITY` when `eta = 0`.
    pub hi: f64,
}

/// Solves the dissipation conditions `c1 > 0`, `c2 > 0` for `b`, intersected
/// with the positive-definiteness constraint `b > 1/sqrt(beta)`:
///
/// ```text
/// lo = max( (2 + alpha_k^2/eps) / (2 alpha' - eta), 1/sqrt(beta) )
/// hi = (2 beta - 2 eta - eps) / eta          (+inf when eta = 0)
/// ```
pub fn admissible_b_interval(
    alpha: f64,
    alpha_prime: f64,
    beta: f64,
    eta: f64,
    eps: f64,
    variant: Variant,
) -> Result<BInterval, RatesError> {
    require_positive("eps", eps)?;
    let threshold = eta0(alpha, alpha_prime, beta, variant)?;
    if !(eta >= 0.0) || !eta.is_finite() || eta >= threshold {
        return Err(RatesError::EtaOutOfRange {
            eta,
            eta0: threshold,
        });
    }
    let ak = variant.alpha_k(alpha);
    let lo = ((2.0 + ak * ak / eps) / (2.0 * alpha_prime - eta)).max(1.0 / beta.sqrt());
    let budget = 2.0 * beta - 2.0 * eta - eps;
    let hi = if eta == 0.0 {
        // the position condition no longer involves b; it either always
        // holds or never does
        if budget > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        budget / eta
    };
    if lo >= hi {
        return Err(RatesError::EmptyInterval { lo, hi });
    }
    Ok(BInterval { lo, hi })
}

/// The Lyapunov quadratic form `Q(x,v) = b beta |x|^2 + 2 x.v + b |v|^2`,
/// acting per coordinate pair through the 2x2 matrix `[[b beta, 1], [1, b]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QForm {
    b: f64,
    beta: f64,
}

impl QForm {
    pub fn new(b: f64, beta: f64) -> Result<Self, RatesError> {
        require_positive("b", b)?;
        require_positive("beta", beta)?;
        // det = b^2 beta - 1 must be positive
        if b * b * beta <= 1.0 {
            return Err(RatesError::DegenerateForm { b, beta });
        }
        Ok(Self { b, beta })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Eigenvalues `(b(beta+1) -+ sqrt(b^2 (beta-1)^2 + 4)) / 2`.
    pub fn lambda_min(&self) -> f64 {
        let (b, beta) = (self.b, self.beta);
        (b * (beta + 1.0) - (b * b * (beta - 1.0) * (beta - 1.0) + 4.0).sqrt()) / 2.0
    }

    pub fn lambda_max(&self) -> f64 {
        let (b, beta) = (self.b, self.beta);
        (b * (beta + 1.0) + (b * b * (beta - 1.0) * (beta - 1.0) + 4.0).sqrt()) / 2.0
    }

    /// Evaluates `Q` on a phase vector.
    pub fn evaluate(&self, x: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), v.len());
        let mut x2 = 0.0;
        let mut xv = 0.0;
        let mut v2 = 0.0;
        for (xi, vi) in x.iter().zip(v) {
            x2 += xi * xi;
            xv += xi * vi;
            v2 += vi * vi;
        }
        self.b * self.beta * x2 + 2.0 * xv + self.b * v2
    }

    /// `Q` from precomputed moments `E|x|^2`, `E x.v`, `E|v|^2`.
    pub fn from_moments(&self, x2: f64, xv: f64, v2: f64) -> f64 {
        self.b * self.beta * x2 + 2.0 * xv + self.b * v2
    }
}

/// Spectral bounds of `Q` and the induced metric-equivalence constant
/// `C' = sqrt(lambda_max / lambda_min)`.
pub fn equivalence_constants(q: &QForm) -> (f64, f64, f64) {
    let lo = q.lambda_min();
    let hi = q.lambda_max();
    (lo, hi, (hi / lo).sqrt())
}

/// Every derived constant for one `(coefficients, eta)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub eta: f64,
    pub variant: Variant,
    pub mode: SearchMode,
    pub eta0: f64,
    pub b_interval: BInterval,
    pub b_star: f64,
    pub eps_star: f64,
    /// Position dissipation coefficient at the optimum.
    pub c1: f64,
    /// Velocity dissipation coefficient at the optimum.
    pub c2: f64,
    /// Exponential decay rate of `E Q` along the coupling.
    pub rate: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub cprime: f64,
}

impl RateReport {
    pub fn qform(&self) -> QForm {
        QForm::new(self.b_star, self.beta).expect("optimizer stays inside the PD region")
    }
}

fn c2_velocity(alpha_k: f64, alpha_prime: f64, eta: f64, eps: f64, b: f64) -> f64 {
    (2.0 * alpha_prime - eta) * b - 2.0 - alpha_k * alpha_k / eps
}

/// Golden-section maximization on [a, b]; f must be unimodal there.
fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    (m, f(m))
}

/// Grid scan followed by golden-section polish around the best cell.
fn grid_then_golden(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, cells: usize, tol: f64) -> (f64, f64) {
    let mut best_i = 0usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=cells {
        let x = lo + (hi - lo) * i as f64 / cells as f64;
        let y = f(x);
        if y > best {
            best = y;
            best_i = i;
        }
    }
    let a = lo + (hi - lo) * best_i.saturating_sub(1) as f64 / cells as f64;
    let b = lo + (hi - lo) * (best_i + 1).min(cells) as f64 / cells as f64;
    golden_max(f, a, b, tol)
}

/// Largest `C >= 0` with `diag(c1, c2) - C Q_mat >= 0` for the per-pair
/// matrix `Q_mat = [[b beta, 1], [1, b]]`: the smaller root of
/// `(b^2 beta - 1) C^2 - (c1 b + c2 b beta) C + c1 c2`.
fn lmi_rate(beta: f64, b: f64, c1: f64, c2: f64) -> f64 {
    if c1 <= 0.0 || c2 <= 0.0 {
        return 0.0;
    }
    let det = b * b * beta - 1.0;
    if det <= 0.0 {
        return 0.0;
    }
    let s = c1 * b + c2 * b * beta;
    let disc = s * s - 4.0 * det * c1 * c2;
    if disc <= 0.0 {
        // numerically degenerate; fall back to the two-step bound
        return c1.min(c2) / QForm { b, beta }.lambda_max();
    }
    (s - disc.sqrt()) / (2.0 * det)
}

/// Computes the contraction rate report for perturbation size
/// `eta = gamma + delta`.
///
/// `SearchMode::TwoStep` fixes `eps = beta` and maximizes
/// `min(c1, c2) / lambda_max(Q)` over the admissible `b`, with the
/// dissipation pair
///
/// ```text
/// c1 = 2 beta - 2 eta - eps
/// c2 = (2 alpha' - eta) b - 2 - alpha_k^2 / eps
/// ```
///
/// giving rate `1/3` at `(b, eps) = (2, 1)` in the free unit case and
/// `0.2667` at `eta = 0.1`.
/// `SearchMode::FullLmi` keeps the `b`-dependent position budget
/// `c1 = 2 beta - 2 eta - eps - eta b` and scans `(b, eps)` under the
/// sharper semidefiniteness condition; it dominates the two-step route.
pub fn contraction_rate(
    alpha: f64,
    alpha_prime: f64,
    beta: f64,
    eta: f64,
    variant: Variant,
    mode: SearchMode,
) -> Result<RateReport, RatesError> {
    let threshold = eta0(alpha, alpha_prime, beta, variant)?;
    if !(eta >= 0.0) || !eta.is_finite() || eta >= threshold {
        return Err(RatesError::EtaOutOfRange {
            eta,
            eta0: threshold,
        });
    }
    let ak = variant.alpha_k(alpha);

    let (b_star, eps_star, c1, c2, rate, interval) = match mode {
        SearchMode::TwoStep => {
            let eps = beta;
            let interval = admissible_b_interval(alpha, alpha_prime, beta, eta, eps, variant)?;
            let c1 = 2.0 * beta - 2.0 * eta - eps;
            // The objective rises until c2 crosses c1 and decays afterwards,
            // so a finite scan window always brackets the maximum.
            let crossing = (2.0 + ak * ak / eps + c1) / (2.0 * alpha_prime - eta);
            let span = 1e-12 * (1.0 + interval.lo.abs());
            let scan_lo = interval.lo + span;
            let scan_hi = if interval.hi.is_finite() {
                interval.hi - span
            } else {
                4.0 * crossing.max(interval.lo) + 4.0
            };
            let objective = |b: f64| -> f64 {
                let c2 = c2_velocity(ak, alpha_prime, eta, eps, b);
                let lmax = QForm { b, beta }.lambda_max();
                c1.min(c2) / lmax
            };
            let (b_star, rate) = grid_then_golden(&objective, scan_lo, scan_hi, 4096, 1e-10 * (1.0 + scan_hi));
            let c2 = c2_velocity(ak, alpha_prime, eta, eps, b_star);
            (b_star, eps, c1, c2, rate, interval)
        }
        SearchMode::FullLmi => {
            let pd_lo = 1.0 / beta.sqrt();
            let mut b_lo = pd_lo * 1.000_001;
            let mut b_hi = 10.0 * pd_lo.max(1.0);
            let mut e_lo = 2.0 * beta / 256.0;
            let mut e_hi = 2.0 * beta;
            let objective = |b: f64, eps: f64| -> f64 {
                let c1 = 2.0 * beta - 2.0 * eta - eps - eta * b;
                let c2 = c2_velocity(ak, alpha_prime, eta, eps, b);
                lmi_rate(beta, b, c1, c2)
            };
            let cells = 64usize;
            let mut best_b = b_lo;
            let mut best_e = e_lo;
            let mut best = f64::NEG_INFINITY;
            for _pass in 0..6 {
                best = f64::NEG_INFINITY;
                for i in 0..=cells {
                    let b = b_lo + (b_hi - b_lo) * i as f64 / cells as f64;
                    for j in 0..=cells {
                        let e = e_lo + (e_hi - e_lo) * j as f64 / cells as f64;
                        let y = objective(b, e);
                        if y > best {
                            best = y;
                            best_b = b;
                            best_e = e;
                        }
                    }
                }
                let db = (b_hi - b_lo) / cells as f64;
                let de = (e_hi - e_lo) / cells as f64;
                b_lo = (best_b - 2.0 * db).max(pd_lo * 1.000_001);
                b_hi = best_b + 2.0 * db;
                e_lo = (best_e - 2.0 * de).max(1e-12 * beta);
                e_hi = (best_e + 2.0 * de).min(2.0 * beta);
            }
            let c1 = 2.0 * beta - 2.0 * eta - best_e - eta * best_b;
            let c2 = c2_velocity(ak, alpha_prime, eta, best_e, best_b);
            let interval = admissible_b_interval(alpha, alpha_prime, beta, eta, best_e, variant)
                .unwrap_or(BInterval {
                    lo: best_b,
                    hi: best_b,
                });
            (best_b, best_e, c1, c2, best, interval)
        }
    };

    let q = QForm::new(b_star, beta)?;
    let (lambda_min, lambda_max, cprime) = equivalence_constants(&q);
    Ok(RateReport {
        alpha,
        alpha_prime,
        beta,
        eta,
        variant,
        mode,
        eta0: threshold,
        b_interval: interval,
        b_star,
        eps_star,
        c1,
        c2,
        rate,
        lambda_min,
        lambda_max,
        cprime,
    })
}
