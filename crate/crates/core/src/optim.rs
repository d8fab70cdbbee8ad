//! Dense Levenberg–Marquardt for small nonlinear least-squares problems.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease of an accepted step is below this.
    pub cost_tolerance: f64,
    /// Stop when `‖Jᵀr‖∞` is below this.
    pub gradient_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            cost_tolerance: 1e-15,
            gradient_tolerance: 1e-13,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub x: DVector<f64>,
    /// `½‖r‖²` at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `½‖r(x)‖²`. `eval` returns the residual and its Jacobian, or
/// `None` where the problem is undefined (the step is then rejected).
pub fn levenberg_marquardt<F>(mut eval: F, x0: DVector<f64>, opts: &LmOptions) -> Option<LmResult>
where
    F: FnMut(&DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)>,
{
    let (mut r, mut jac) = eval(&x0)?;
    let mut x = x0;
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda = opts.initial_damping;
    let n = x.len();

    for it in 0..opts.max_iterations {
        let g = jac.transpose() * &r;
        if g.amax() < opts.gradient_tolerance || cost == 0.0 {
            return Some(LmResult { x, cost, iterations: it, converged: true });
        }
        let jtj = jac.transpose() * &jac;
        let scale = jtj.diagonal().max().max(1e-300);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12 * scale);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &x + &step;
            match eval(&trial) {
                Some((tr, tj)) if 0.5 * tr.norm_squared() < cost => {
                    let new_cost = 0.5 * tr.norm_squared();
                    let rel = (cost - new_cost) / cost.max(1e-300);
                    x = trial;
                    r = tr;
                    jac = tj;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if rel < opts.cost_tolerance || step.amax() < 1e-15 {
                        return Some(LmResult { x, cost, iterations: it + 1, converged: true });
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // No descent at any damping: stationary to machine precision.
            return Some(LmResult { x, cost, iterations: it, converged: true });
        }
    }
    Some(LmResult {
        x,
        cost,
        iterations: opts.max_iterations,
        converged: false,
    })
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}
