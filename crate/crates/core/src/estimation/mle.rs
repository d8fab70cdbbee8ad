use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cptp::CptpChart;
use super::gauge::{gauge_optimize, gauge_optimize_physical};
use super::likelihood::{log_likelihood, score_and_fisher, score_and_information, Information, Observations};
use super::model::GateSetModel;
use super::EstimationError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Iteration cap per refinement stage.
    pub max_iterations: usize,
    /// An accepted step improving the log-likelihood by less than this ends
    /// the stage.
    pub tolerance: f64,
    /// A stage also ends when its last [`STALL_WINDOW`] steps together gained
    /// less than this. Misspecified models make Gauss-Newton creep.
    pub stall_tolerance: f64,
    /// Fit on sequences with power ≤ L for increasing L, warm-starting.
    pub progressive: bool,
}

pub const STALL_WINDOW: usize = 10;

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iterations: 200,
            tolerance: 1e-9,
            stall_tolerance: 1e-2,
            progressive: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub model: GateSetModel,
    pub log_likelihood: f64,
    /// False when the final stage hit its iteration cap; the model is the
    /// best found.
    pub converged: bool,
    pub iterations: usize,
}

struct StageResult {
    model: GateSetModel,
    log_likelihood: f64,
    converged: bool,
    iterations: usize,
}

/// Local quadratic model of the log-likelihood at a point.
struct Local {
    l: f64,
    score: DVector<f64>,
    info: DMatrix<f64>,
}

/// Damped Fisher scoring: solve `(I + λ diag I) δ = ∇ℓ`, shrinking `λ` on
/// success and growing it on failure. `local` gives the log-likelihood,
/// score and information at a coordinate vector; `model` maps coordinates to
/// a gate set.
fn scoring<M, L>(obs: &Observations, start: DVector<f64>, opts: &MleOptions, model: M, local: L) -> StageResult
where
    M: Fn(&DVector<f64>) -> GateSetModel,
    L: Fn(&GateSetModel, &DVector<f64>) -> Local,
{
    let mut x = start;
    let mut current = model(&x);
    let mut here = local(&current, &x);
    let mut lambda: f64 = 1e-3;
    let n = x.len();
    let mut recent = std::collections::VecDeque::with_capacity(STALL_WINDOW);
    let done = |model, l, converged, iterations| StageResult { model, log_likelihood: l, converged, iterations };
    for it in 0..opts.max_iterations {
        let info = &here.info;
        let max_diag = info.diagonal().amax().max(1e-300);
        let mut improved = None;
        while lambda <= 1e12 {
            let mut a = info.clone();
            for i in 0..n {
                a[(i, i)] += lambda * info[(i, i)].abs().max(1e-10 * max_diag);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let trial_x = &x + chol.solve(&here.score);
            let trial = model(&trial_x);
            let lt = log_likelihood(&trial, obs);
            if lt > here.l {
                improved = Some((trial_x, trial, lt));
                lambda = (lambda / 10.0).max(1e-9);
                break;
            }
            lambda *= 10.0;
        }
        let Some((nx, nm, nl)) = improved else {
            return done(current, here.l, true, it);
        };
        let gain = nl - here.l;
        x = nx;
        current = nm;
        here = local(&current, &x);
        if recent.len() == STALL_WINDOW {
            recent.pop_front();
        }
        recent.push_back(gain);
        let stalled = recent.len() == STALL_WINDOW && recent.iter().sum::<f64>() < opts.stall_tolerance;
        if gain < opts.tolerance || stalled {
            return done(current, here.l, true, it + 1);
        }
    }
    done(current, here.l, false, opts.max_iterations)
}

/// Trace-preserving parameters, unconstrained.
fn maximize_tp(obs: &Observations, start: &GateSetModel, opts: &MleOptions) -> StageResult {
    scoring(
        obs,
        start.to_params(),
        opts,
        |x| start.with_params(x),
        |m, _| {
            let (l, score, info) = score_and_fisher(m, obs);
            Local { l, score, info }
        },
    )
}

/// Chart coordinates, where every point is physical. The information is
/// `Jᵀ F J − Σ sᵢ ∇²xᵢ` with the observed-count weights, so that steps
/// toward pure states and unitaries are Newton steps.
fn maximize_chart(obs: &Observations, chart: &CptpChart, start: DVector<f64>, opts: &MleOptions) -> StageResult {
    scoring(
        obs,
        start,
        opts,
        |t| chart.model(t),
        |m, t| {
            let (l, s, f) = score_and_information(m, obs, Information::Observed);
            let j = chart.jacobian(t);
            let jt = j.transpose();
            let info = &jt * f * j - chart.curvature(t, &s);
            Local { l, score: &jt * s, info }
        },
    )
}

/// Maximum-likelihood CPTP gate set. Progressive trace-preserving fits find
/// the basin; the result is gauge optimized to the target, moved onto the
/// CPTP set, and refined in chart coordinates.
pub fn fit_h1_mle(
    obs: &Observations,
    seed: &GateSetModel,
    opts: &MleOptions,
) -> Result<MleFit, EstimationError> {
    if seed.labels() != obs.labels {
        return Err(EstimationError::LabelMismatch);
    }
    let mut stages: Vec<u32> = obs.powers().into_iter().filter(|&p| p >= 1).collect();
    if !opts.progressive || stages.is_empty() {
        stages = vec![u32::MAX];
    }
    let mut model = seed.clone();
    let mut iterations = 0;
    for &p in &stages {
        let subset;
        let data = if p == u32::MAX {
            obs
        } else {
            subset = obs.truncated(p);
            &subset
        };
        let r = maximize_tp(data, &model, opts);
        log::debug!(
            "stage L<={p}: {} sequences, logL {:.6}, {} iterations",
            data.len(),
            r.log_likelihood,
            r.iterations
        );
        iterations += r.iterations;
        model = r.model;
    }
    // The trace-preserving optimum is only fixed up to gauge; move it next to
    // the target first so that projection does not undo the fit.
    let target = GateSetModel::target(&obs.labels);
    if let Ok(g) = gauge_optimize(&model, &target) {
        model = g.model;
    }
    let tp_logl = log_likelihood(&model, obs);
    if !model.is_physical() {
        model = model.project_cptp();
    }
    let mut fit = refine_h1_mle(obs, &model, opts)?;
    log::debug!("trace-preserving logL {tp_logl:.6}, CPTP logL {:.6}", fit.log_likelihood);
    fit.iterations += iterations;
    Ok(fit)
}

/// CPTP maximum likelihood from a physical `start`, in chart coordinates
/// only.
pub fn refine_h1_mle(
    obs: &Observations,
    start: &GateSetModel,
    opts: &MleOptions,
) -> Result<MleFit, EstimationError> {
    if start.labels() != obs.labels {
        return Err(EstimationError::LabelMismatch);
    }
    let chart = CptpChart::new(start);
    let r = maximize_chart(obs, &chart, chart.coordinates(start), opts);
    let (mut model, converged) = if start.is_physical() && log_likelihood(start, obs) > r.log_likelihood {
        (start.clone(), r.converged)
    } else {
        (r.model, r.converged)
    };
    // Chart steps wander along gauge directions freely.
    let target = GateSetModel::target(&obs.labels);
    if let Ok(g) = gauge_optimize_physical(&model, &target) {
        model = g.model;
    }
    if !converged {
        log::warn!("H1 maximum likelihood hit the iteration cap; reporting best model found");
    }
    let log_likelihood = log_likelihood(&model, obs);
    Ok(MleFit {
        model,
        log_likelihood,
        converged,
        iterations: r.iterations,
    })
}
