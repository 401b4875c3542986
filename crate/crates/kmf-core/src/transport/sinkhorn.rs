//! Log-domain Sinkhorn iteration on uniform marginals.
//!
//! Working with potentials instead of scalings keeps the iteration stable
//! at small regularization, where the kernel `exp(-C/eps)` underflows.

/// Outcome of a Sinkhorn solve.
#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    /// Transport cost `<P, C>` of the entropic plan (without the entropy
    /// term), an upper bound on the unregularized optimum.
    pub cost: f64,
    /// Row-major n x m coupling.
    pub plan: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// L1 violation of the row marginals at exit.
    pub marginal_error: f64,
}

fn logsumexp(acc: &mut Vec<f64>) -> f64 {
    let mx = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    let s: f64 = acc.iter().map(|a| (a - mx).exp()).sum();
    mx + s.ln()
}

/// Runs Sinkhorn with uniform weights `1/n`, `1/m` until the row-marginal
/// L1 violation drops below `tol` or `max_iter` sweeps elapse.
///
/// Small regularizations converge impractically slowly from a cold start,
/// so the potentials are warm-started by epsilon scaling: the iteration
/// anneals from a regularization comparable to the cost scale down to the
/// requested one. Convergence is judged at the requested `eps` only.
pub fn sinkhorn_uniform(
    cost: &[f64],
    n: usize,
    m: usize,
    eps: f64,
    max_iter: usize,
    tol: f64,
) -> SinkhornSolution {
    assert!(eps > 0.0, "regularization must be positive");
    assert_eq!(cost.len(), n * m);
    let log_a = -(n as f64).ln();
    let log_b = -(m as f64).ln();
    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];
    let mut acc = vec![0.0f64; n.max(m)];

    let mut sweep = |f: &mut Vec<f64>, g: &mut Vec<f64>, level: f64| -> f64 {
        // f-update makes row marginals exact
        for i in 0..n {
            acc.clear();
            for j in 0..m {
                acc.push((g[j] - cost[i * m + j]) / level + log_b);
            }
            f[i] = -level * logsumexp(&mut acc);
        }
        // g-update makes column marginals exact and perturbs rows
        for j in 0..m {
            acc.clear();
            for i in 0..n {
                acc.push((f[i] - cost[i * m + j]) / level + log_a);
            }
            g[j] = -level * logsumexp(&mut acc);
        }
        // row-marginal L1 violation of the current plan
        let target = 1.0 / n as f64;
        let mut err = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..m {
                row += ((f[i] + g[j] - cost[i * m + j]) / level + log_a + log_b).exp();
            }
            err += (row - target).abs();
        }
        err
    };

    let cost_scale = cost.iter().cloned().fold(0.0f64, f64::max);
    let mut schedule = Vec::new();
    let mut level = cost_scale / 8.0;
    while level > eps * 2.0 {
        schedule.push(level);
        level /= 4.0;
    }
    schedule.push(eps);

    let mut iterations = 0;
    let mut converged = false;
    let mut marginal_error = f64::INFINITY;
    let warm_budget = (max_iter / 4).max(1);

    'outer: for (li, &level) in schedule.iter().enumerate() {
        let last = li + 1 == schedule.len();
        let level_tol = if last { tol } else { tol.max(1e-3) };
        let level_cap = if last { max_iter } else { warm_budget };
        let mut local = 0;
        while iterations < max_iter && local < level_cap {
            iterations += 1;
            local += 1;
            let err = sweep(&mut f, &mut g, level);
            if last {
                marginal_error = err;
            }
            if err <= level_tol {
                if last {
                    converged = true;
                }
                continue 'outer;
            }
        }
        if iterations >= max_iter {
            break;
        }
    }

    let mut plan = vec![0.0f64; n * m];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = ((f[i] + g[j] - cost[i * m + j]) / eps + log_a + log_b).exp();
            plan[i * m + j] = p;
            total += p * cost[i * m + j];
        }
    }

    SinkhornSolution {
        cost: total,
        plan,
        converged,
        iterations,
        marginal_error,
    }
}
