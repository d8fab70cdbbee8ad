//! Gate-set tomography under three nested hypotheses and likelihood-ratio
//! model selection.
//!
//! * H0: every sequence has its own outcome probability.
//! * H1: one fixed CPTP map per gate (Markovian).
//! * H2: every gate is its target Clifford followed by a Pauli channel.
//!
//! H1 is fit by progressive maximum likelihood from a linear-inversion
//! seed; H2 is the projection of the gauge-optimized H1 estimate.

mod cptp;
mod gauge;
mod h2;
mod lgst;
mod likelihood;
mod mle;
mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cptp::{coord_count, lindblad_generator, CptpChart, LINDBLAD_PARAMS};
pub use gauge::{
    gauge_jacobian, gauge_optimize, gauge_optimize_physical, h1_dof, h2_dof, h2_residual_gauge_rank, h2_tangent, GaugeFit,
    MIN_GAUGE_DET, RANK_TOLERANCE, TP_GAUGE_DIM,
};
pub use h2::{monomial_eigenvalues, project_gate, project_h2, project_simplex};
pub use lgst::{lgst_seed, MAX_CONDITION};
pub use likelihood::{log_likelihood, predicted_probabilities, Observations, P_FLOOR};
pub use mle::{fit_h1_mle, refine_h1_mle, MleFit, MleOptions, STALL_WINDOW};
pub use model::{project_cptp, project_effect, project_state, GateSetModel, GATE_PARAMS, SPAM_PARAMS};

use crate::gst_design::GstDesign;
use crate::noise::Dataset;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("gate {0} is not part of the model")]
    UnknownGate(String),
    #[error("dataset row refers to unknown sequence {0}")]
    UnknownSequence(u64),
    #[error("sequence `{0}` needed for linear inversion is missing")]
    MissingSequence(String),
    #[error("model and target cover different gates")]
    LabelMismatch,
    #[error("informationally incomplete data (fiducial condition number {condition:e})")]
    InformationallyIncomplete { condition: f64 },
    #[error("ill-conditioned gauge (|det G| = {0:e})")]
    SingularGauge(f64),
    #[error("non-positive degrees of freedom difference {0}")]
    NonPositiveDof(i64),
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
    H2,
}

/// `Σ k log(k/n) + (n-k) log(1-k/n)` with `0 log 0 = 0`, and the number of
/// sequences.
pub fn fit_h0(dataset: &Dataset) -> (f64, usize) {
    let mut l = 0.0;
    for r in &dataset.rows {
        l += saturated_term(r.n as f64, r.k as f64);
    }
    (l, dataset.rows.len())
}

pub fn fit_h0_observations(obs: &Observations) -> (f64, usize) {
    let l = (0..obs.len()).map(|i| saturated_term(obs.n[i], obs.k[i])).sum();
    (l, obs.len())
}

fn saturated_term(n: f64, k: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let p = k / n;
    let mut l = 0.0;
    if k > 0.0 {
        l += k * p.ln();
    }
    if n - k > 0.0 {
        l += (n - k) * (1.0 - p).ln();
    }
    l
}

/// `(2(ℓ_null − ℓ_alt) − k) / √(2k)` with `k = dof_null − dof_alt`.
pub fn n_sigma(logl_alt: f64, logl_null: f64, dof_alt: usize, dof_null: usize) -> Result<f64, EstimationError> {
    let k = dof_null as i64 - dof_alt as i64;
    if k <= 0 {
        return Err(EstimationError::NonPositiveDof(k));
    }
    let k = k as f64;
    Ok((2.0 * (logl_null - logl_alt) - k) / (2.0 * k).sqrt())
}

/// Free parameters of a hypothesis net of gauge directions, counted as
/// numerical ranks at `model`.
pub fn model_dof(kind: Hypothesis, model: &GateSetModel, n_sequences: usize) -> usize {
    match kind {
        Hypothesis::H0 => n_sequences,
        Hypothesis::H1 => h1_dof(model),
        Hypothesis::H2 => h2_dof(model),
    }
}

pub const DOF_CONVENTION: &str = "numerical-rank";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(rename = "logL_h0")]
    pub logl_h0: f64,
    #[serde(rename = "logL_h1")]
    pub logl_h1: f64,
    #[serde(rename = "logL_h2")]
    pub logl_h2: f64,
    pub dof_h0: usize,
    pub dof_h1: usize,
    pub dof_h2: usize,
    pub n_sigma_h1: f64,
    pub n_sigma_h2: f64,
    pub h1_converged: bool,
    /// True when the first H1 fit scored below its own H2 projection and
    /// was replaced.
    pub h1_reseeded: bool,
    pub n_sequences: usize,
    pub total_shots: f64,
    pub dof_convention: String,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<FitReport, EstimationError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub report: FitReport,
    /// Gauge-optimized to the target.
    pub h1: GateSetModel,
    pub h2: GateSetModel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub mle: MleOptions,
}

/// H0, H1 and H2 fits with their badness-of-fit statistics.
pub fn fit_hypotheses(
    obs: &Observations,
    design: &GstDesign,
    opts: &FitOptions,
) -> Result<FitOutcome, EstimationError> {
    let (logl_h0, dof_h0) = fit_h0_observations(obs);
    let target = GateSetModel::target(&obs.labels);
    let seed = gauge_optimize(&lgst_seed(obs, design)?, &target)?.model;

    // The linear-inversion start can sit in the basin of a poor optimum when
    // its estimate is far from physical; the target is a second start.
    let mut fit = fit_h1_mle(obs, &seed, &opts.mle)?;
    let alt = fit_h1_mle(obs, &target, &opts.mle)?;
    if alt.log_likelihood > fit.log_likelihood {
        fit = alt;
    }
    let mut h1 = fit.model;
    let mut logl_h1 = fit.log_likelihood;
    let mut converged = fit.converged;

    let mut h2 = project_h2(&h1);
    let mut logl_h2 = log_likelihood(&h2, obs);
    let mut reseeded = false;
    if logl_h2 > logl_h1 {
        reseeded = true;
        let refit = fit_h1_mle(obs, &h2, &MleOptions { progressive: false, ..opts.mle })?;
        converged &= refit.converged;
        if refit.log_likelihood > logl_h1 {
            h1 = refit.model;
            logl_h1 = refit.log_likelihood;
            let again = project_h2(&h1);
            let l = log_likelihood(&again, obs);
            if l > logl_h2 {
                h2 = again;
                logl_h2 = l;
            }
        }
        if logl_h2 > logl_h1 {
            // H2 lies inside H1, so the H2 estimate is an admissible H1 point.
            h1 = h2.clone();
            logl_h1 = logl_h2;
        }
    }

    let dof_h1 = h1_dof(&h1);
    let dof_h2 = h2_dof(&h2);
    h1.gauge_dim = h1.param_count - dof_h1;
    h2.param_count = 3 * h2.gates.len() + SPAM_PARAMS;
    h2.gauge_dim = h2.param_count - dof_h2;

    let report = FitReport {
        logl_h0,
        logl_h1,
        logl_h2,
        dof_h0,
        dof_h1,
        dof_h2,
        n_sigma_h1: n_sigma(logl_h1, logl_h0, dof_h1, dof_h0)?,
        n_sigma_h2: n_sigma(logl_h2, logl_h0, dof_h2, dof_h0)?,
        h1_converged: converged,
        h1_reseeded: reseeded,
        n_sequences: obs.len(),
        total_shots: obs.n.iter().sum(),
        dof_convention: DOF_CONVENTION.to_string(),
    };
    Ok(FitOutcome { report, h1, h2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{DatasetMetadata, DatasetRow};

    fn ds(rows: &[(u64, u64)]) -> Dataset {
        let rows = rows
            .iter()
            .enumerate()
            .map(|(i, &(n, k))| DatasetRow { sequence_id: i as u64, n, k })
            .collect();
        Dataset::new(rows, DatasetMetadata::synthetic(false)).unwrap()
    }

    #[test]
    fn h0_examples() {
        assert_eq!(fit_h0(&ds(&[(10, 10)])), (0.0, 1));
        let (l, d) = fit_h0(&ds(&[(2, 1)]));
        assert!((l - 2.0 * 0.5f64.ln()).abs() < 1e-15 && d == 1);
        let (l, d) = fit_h0(&ds(&[(4, 2), (4, 4)]));
        assert!((l - 4.0 * 0.5f64.ln()).abs() < 1e-15 && d == 2);
    }

    #[test]
    fn n_sigma_examples() {
        assert_eq!(n_sigma(-10.0, -5.0, 0, 10).unwrap(), 0.0);
        let k = 50.0f64;
        let llr = k + 2.0 * (2.0 * k).sqrt();
        let v = n_sigma(-llr / 2.0, 0.0, 10, 60).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!(matches!(n_sigma(0.0, 0.0, 5, 5), Err(EstimationError::NonPositiveDof(0))));
    }
}
