//! Small numeric helpers shared by the dynamics and the experiment drivers.

/// Fixed chunk width for cross-particle reductions. Summing each chunk
/// sequentially and then the chunk totals in order pins the floating-point
/// result independently of how the work is scheduled.
pub const REDUCTION_CHUNK: usize = 1024;

/// Deterministic chunked sum with fixed chunk boundaries.
pub fn chunked_sum(values: &[f64]) -> f64 {
    if values.len() <= REDUCTION_CHUNK {
        return values.iter().sum();
    }
    values
        .chunks(REDUCTION_CHUNK)
        .map(|c| c.iter().sum::<f64>())
        .sum()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    chunked_sum(values) / values.len() as f64
}

/// Two-pass sample variance (denominator `n - 1`).
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let centered: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    chunked_sum(&centered) / (values.len() - 1) as f64
}

/// Standard error of the mean.
pub fn standard_error(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    (sample_variance(values) / values.len() as f64).sqrt()
}

/// Ordinary least squares `y ~ intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope estimate.
    pub slope_se: f64,
    pub n: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let slope_se = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        r2,
        slope_se,
        n,
    })
}
