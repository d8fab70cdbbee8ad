//! Average gate infidelity, diamond-norm distance and parametric bootstrap
//! intervals.
//!
//! Diamond distances are the full norm `‖R − T‖◇` with no ½ factor, so a
//! depolarizing channel of strength `p` sits at `3p/2`. They are found by a
//! see-saw over pure states of the qubit and a two-dimensional reference:
//! for fixed input the best dual witness is the sign of the output, and for a
//! fixed witness the best input is a top eigenvector. Each step can only
//! increase the objective; many seeded starts guard against local maxima.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{predicted_probabilities, EstimationError, GateSetModel, Observations};
use crate::pauli_algebra::{PauliLabel, Ptm, C64};

pub const DIAMOND_STARTS: usize = 32;
/// A see-saw run stops once one round gains less than this.
pub const DIAMOND_TOLERANCE: f64 = 1e-12;
const DIAMOND_MAX_ITERATIONS: usize = 10_000;
const DIAMOND_SEED: u64 = 0x5eed_d1a0;

/// Channels whose Choi spectrum dips further than this below zero are
/// rejected.
pub const METRIC_CP_TOLERANCE: f64 = 1e-6;

pub const MIN_RESAMPLES: usize = 100;

pub const DIAMOND_CONVENTION: &str = "full diamond norm of the difference, no 1/2 factor";
pub const GAUGE_CONVENTION: &str = "trace-preserving gauge optimized to the target";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("target transfer matrix is singular")]
    SingularTarget,
    #[error("channel is not CPTP (minimum Choi eigenvalue {0:e})")]
    NotCptp(f64),
    #[error("no diamond-norm start converged")]
    NoConvergence,
    #[error("bootstrap needs at least {MIN_RESAMPLES} resamples, got {0}")]
    TooFewResamples(usize),
    #[error("bootstrap refit failed: {0}")]
    Estimation(#[from] EstimationError),
}

/// `1 − (Tr(T⁻¹R) + d)/(d² + d)` with `d = 2`.
pub fn avg_gate_infidelity(r: &Ptm, target: &Ptm) -> Result<f64, MetricsError> {
    let inv = target.0.try_inverse().ok_or(MetricsError::SingularTarget)?;
    let f = ((inv * r.0).trace() + 2.0) / 6.0;
    Ok(1.0 - f)
}

type Op4 = Matrix4<C64>;

fn pauli_coefficients(x: &Matrix2<C64>) -> [C64; 4] {
    PauliLabel::ALL.map(|p| (p.matrix() * x).trace() * std::f64::consts::FRAC_1_SQRT_2)
}

fn from_pauli_coefficients(y: &[C64; 4]) -> Matrix2<C64> {
    let mut out = Matrix2::zeros();
    for (p, c) in PauliLabel::ALL.iter().zip(y) {
        out += p.matrix() * (*c * std::f64::consts::FRAC_1_SQRT_2);
    }
    out
}

/// `(M ⊗ id)(X)` for the map with transfer matrix `m` acting on the first
/// factor of a two-qubit operator.
fn apply_first(m: &Matrix4<f64>, x: &Op4) -> Op4 {
    let mut out = Op4::zeros();
    for j in 0..2 {
        for l in 0..2 {
            let block = Matrix2::from_fn(|i, k| x[(2 * i + j, 2 * k + l)]);
            let c = pauli_coefficients(&block);
            let mut y = [C64::new(0.0, 0.0); 4];
            for (a, ya) in y.iter_mut().enumerate() {
                for (b, cb) in c.iter().enumerate() {
                    *ya += *cb * m[(a, b)];
                }
            }
            let mapped = from_pauli_coefficients(&y);
            for i in 0..2 {
                for k in 0..2 {
                    out[(2 * i + j, 2 * k + l)] = mapped[(i, k)];
                }
            }
        }
    }
    out
}

fn hermitian_part(x: &Op4) -> Op4 {
    (x + x.adjoint()) * C64::new(0.5, 0.0)
}

/// `Σ|λ|` together with the sign witness `Σ sign(λ) |v⟩⟨v|`.
fn trace_norm_and_witness(x: &Op4) -> (f64, Op4) {
    let eig = SymmetricEigen::new(hermitian_part(x));
    let mut norm = 0.0;
    let mut w = Op4::zeros();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        norm += l.abs();
        let v = eig.eigenvectors.column(i);
        let s = if l >= 0.0 { 1.0 } else { -1.0 };
        w += v * v.adjoint() * C64::new(s, 0.0);
    }
    (norm, w)
}

fn see_saw(delta: &Matrix4<f64>, start: Vector4<C64>) -> Option<f64> {
    let adjoint = delta.transpose();
    let mut psi = start.normalize();
    let mut value = f64::NEG_INFINITY;
    for _ in 0..DIAMOND_MAX_ITERATIONS {
        let out = apply_first(delta, &(psi * psi.adjoint()));
        let (norm, w) = trace_norm_and_witness(&out);
        if norm - value <= DIAMOND_TOLERANCE {
            return Some(norm.max(value));
        }
        value = norm;
        let k = hermitian_part(&apply_first(&adjoint, &w));
        let eig = SymmetricEigen::new(k);
        let top = eig.eigenvalues.imax();
        psi = eig.eigenvectors.column(top).into_owned();
    }
    None
}

fn check_cptp(r: &Ptm) -> Result<(), MetricsError> {
    let mu = r.choi_eigenvalues()[0];
    if mu < -METRIC_CP_TOLERANCE {
        return Err(MetricsError::NotCptp(mu));
    }
    Ok(())
}

/// `‖R − T‖◇`, full norm.
pub fn diamond_distance(r: &Ptm, target: &Ptm) -> Result<f64, MetricsError> {
    check_cptp(r)?;
    check_cptp(target)?;
    let delta = r.0 - target.0;
    if delta.amax() == 0.0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(DIAMOND_SEED);
    let mut starts: Vec<Vector4<C64>> = vec![
        // Maximally entangled input, optimal for Pauli channels.
        Vector4::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
    ];
    while starts.len() < DIAMOND_STARTS {
        starts.push(Vector4::from_fn(|_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        }));
    }
    let values: Vec<Option<f64>> = starts.into_par_iter().map(|s| see_saw(&delta, s)).collect();
    values
        .into_iter()
        .flatten()
        .reduce(f64::max)
        .ok_or(MetricsError::NoConvergence)
}

/// Percentile interval `[2.5 %, 97.5 %]` with linear interpolation.
pub fn percentile_interval(samples: &[f64]) -> (f64, f64) {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    (at(0.025), at(0.975))
}

/// Parametric bootstrap: counts are redrawn from `model`'s probabilities,
/// `estimator` is rerun on each resample, and every output coordinate gets
/// a 95 % percentile interval. Resample `i` uses its own ChaCha8 stream, so
/// the result does not depend on thread scheduling.
pub fn bootstrap_ci<F>(
    obs: &Observations,
    model: &GateSetModel,
    n_resamples: usize,
    seed: u64,
    estimator: F,
) -> Result<Vec<(f64, f64)>, MetricsError>
where
    F: Fn(&Observations) -> Result<Vec<f64>, MetricsError> + Sync,
{
    let samples = bootstrap_samples(obs, model, n_resamples, seed, estimator)?;
    let width = samples[0].len();
    Ok((0..width)
        .map(|c| percentile_interval(&samples.iter().map(|s| s[c]).collect::<Vec<_>>()))
        .collect())
}

pub fn bootstrap_samples<F>(
    obs: &Observations,
    model: &GateSetModel,
    n_resamples: usize,
    seed: u64,
    estimator: F,
) -> Result<Vec<Vec<f64>>, MetricsError>
where
    F: Fn(&Observations) -> Result<Vec<f64>, MetricsError> + Sync,
{
    if n_resamples < MIN_RESAMPLES {
        return Err(MetricsError::TooFewResamples(n_resamples));
    }
    let probs = predicted_probabilities(model, obs);
    (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let k = probs
                .iter()
                .zip(&obs.n)
                .map(|(&p, &n)| {
                    Binomial::new(n.round() as u64, p.clamp(0.0, 1.0))
                        .expect("valid binomial")
                        .sample(&mut rng) as f64
                })
                .collect();
            estimator(&obs.with_counts(k))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateMetrics {
    pub gate: String,
    pub infidelity: f64,
    pub diamond_distance: f64,
    /// 95 % interval of the diamond distance.
    pub ci95: Option<(f64, f64)>,
    pub infidelity_ci95: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub diamond_convention: String,
    pub gauge: String,
    pub gates: Vec<GateMetrics>,
}

/// Infidelity and diamond distance of every gate to its target Clifford,
/// flattened as `[r_0, d_0, r_1, d_1, …]` in model gate order.
pub fn metric_vector(model: &GateSetModel) -> Result<Vec<f64>, MetricsError> {
    let mut out = Vec::with_capacity(2 * model.gates.len());
    for (c, r) in &model.gates {
        let t = c.ptm();
        out.push(avg_gate_infidelity(r, &t)?);
        out.push(diamond_distance(r, &t)?);
    }
    Ok(out)
}

impl MetricsReport {
    pub fn from_model(model: &GateSetModel) -> Result<MetricsReport, MetricsError> {
        let v = metric_vector(model)?;
        let gates = model
            .gates
            .iter()
            .enumerate()
            .map(|(i, (c, _))| GateMetrics {
                gate: c.label(),
                infidelity: v[2 * i],
                diamond_distance: v[2 * i + 1],
                ci95: None,
                infidelity_ci95: None,
            })
            .collect();
        Ok(MetricsReport {
            diamond_convention: DIAMOND_CONVENTION.to_string(),
            gauge: GAUGE_CONVENTION.to_string(),
            gates,
        })
    }

    /// Attaches intervals laid out as produced by [`metric_vector`].
    pub fn with_intervals(mut self, ci: &[(f64, f64)]) -> MetricsReport {
        for (i, g) in self.gates.iter_mut().enumerate() {
            g.infidelity_ci95 = ci.get(2 * i).copied();
            g.ci95 = ci.get(2 * i + 1).copied();
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn from_json(text: &str) -> Result<MetricsReport, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Columns `gate,infidelity,diamond,ci_lo,ci_hi`, followed by the
    /// infidelity interval. Missing intervals are empty cells.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["gate", "infidelity", "diamond", "ci_lo", "ci_hi", "infidelity_ci_lo", "infidelity_ci_hi"])
            .expect("in-memory write");
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for g in &self.gates {
            w.write_record([
                g.gate.clone(),
                g.infidelity.to_string(),
                g.diamond_distance.to_string(),
                cell(g.ci95.map(|c| c.0)),
                cell(g.ci95.map(|c| c.1)),
                cell(g.infidelity_ci95.map(|c| c.0)),
                cell(g.infidelity_ci95.map(|c| c.1)),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Transfer-matrix entries of one gate in row-major order.
pub fn ptm_entries(r: &Ptm) -> Vec<f64> {
    (0..16).map(|e| r.0[(e / 4, e % 4)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli_algebra::{rotation_unitary, CliffordIndex, PauliProbVector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn infidelity_examples() {
        let id = Ptm::identity();
        assert_eq!(avg_gate_infidelity(&id, &id).unwrap(), 0.0);
        let dep = Ptm::diagonal([1.0, 0.9, 0.9, 0.9]);
        assert_abs_diff_eq!(avg_gate_infidelity(&dep, &id).unwrap(), 0.05, epsilon = 1e-15);
        let z = Ptm::from_unitary(&rotation_unitary([0.0, 0.0, 1.0], 0.1));
        let r = avg_gate_infidelity(&z, &id).unwrap();
        assert_abs_diff_eq!(r, 1.0 - (4.0 + 2.0 * 0.1f64.cos()) / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.001665, epsilon = 1e-6);
        assert!(matches!(
            avg_gate_infidelity(&id, &Ptm::diagonal([1.0, 0.0, 1.0, 1.0])),
            Err(MetricsError::SingularTarget)
        ));
    }

    #[test]
    fn infidelity_is_relative_to_the_target() {
        let c = CliffordIndex::x_half();
        let dep = Ptm::diagonal([1.0, 0.9, 0.9, 0.9]) * c.ptm();
        assert_abs_diff_eq!(avg_gate_infidelity(&dep, &c.ptm()).unwrap(), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn diamond_depolarizing() {
        let id = Ptm::identity();
        assert_eq!(diamond_distance(&id, &id).unwrap(), 0.0);
        let d = diamond_distance(&Ptm::diagonal([1.0, 0.9, 0.9, 0.9]), &id).unwrap();
        assert_abs_diff_eq!(d, 0.15, epsilon = 1e-8);
    }

    #[test]
    fn diamond_pauli_channel() {
        let p = PauliProbVector::new([0.925, 0.025, 0.025, 0.025]).unwrap().ptm();
        let d = diamond_distance(&p, &Ptm::identity()).unwrap();
        assert_abs_diff_eq!(d, 0.15, epsilon = 1e-8);
        let q = PauliProbVector::new([0.9, 0.07, 0.0, 0.03]).unwrap().ptm();
        assert_abs_diff_eq!(diamond_distance(&q, &Ptm::identity()).unwrap(), 0.2, epsilon = 1e-8);
    }

    #[test]
    fn diamond_unitary_rotation() {
        // Two unitaries differing by angle θ: 2 sin(θ/2).
        let theta = 0.1f64;
        let z = Ptm::from_unitary(&rotation_unitary([0.0, 0.0, 1.0], theta));
        let d = diamond_distance(&z, &Ptm::identity()).unwrap();
        assert_abs_diff_eq!(d, 2.0 * (theta / 2.0).sin(), epsilon = 1e-7);
        let r = avg_gate_infidelity(&z, &Ptm::identity()).unwrap();
        assert!(d > 10.0 * r);
    }

    #[test]
    fn amplitude_damping_against_brute_force() {
        // Brute force over random pure inputs bounds the variational value
        // from below, and the variational value must not exceed the
        // two-sided trace-norm bound at its own optimum.
        let gamma: f64 = 0.1;
        let k0 = Matrix2::new(
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new((1.0 - gamma).sqrt(), 0.0),
        );
        let k1 = Matrix2::new(C64::new(0.0, 0.0), C64::new(gamma.sqrt(), 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let ad = Ptm::from_kraus(&[k0, k1]);
        let d = diamond_distance(&ad, &Ptm::identity()).unwrap();
        let delta = ad.0 - Matrix4::identity();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut best: f64 = 0.0;
        for _ in 0..20_000 {
            let v = Vector4::<C64>::from_fn(|_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .normalize();
            best = best.max(trace_norm_and_witness(&apply_first(&delta, &(v * v.adjoint()))).0);
        }
        assert!(d >= best - 1e-12);
        assert!(d - best < 1e-2);
    }

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile_interval(&v), (2.5, 97.5));
    }

    #[test]
    fn report_csv_layout() {
        let m = GateSetModel::target(&crate::gst_design::target_gates());
        let rep = MetricsReport::from_model(&m).unwrap().with_intervals(&[(0.0, 0.1); 6]);
        let csv = rep.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "gate,infidelity,diamond,ci_lo,ci_hi,infidelity_ci_lo,infidelity_ci_hi");
        assert_eq!(lines.count(), 3);
        assert!(rep.gates.iter().all(|g| g.infidelity.abs() < 1e-15 && g.diamond_distance == 0.0));
        assert_eq!(MetricsReport::from_json(&rep.to_json()).unwrap(), rep);
    }
}
