//! Synthetic data for a noisy single qubit: per-gate channels with coherent,
//! stochastic and slowly drifting components, outcome probabilities, and
//! shot sampling over an interleaved randomized/plain schedule.

mod channel;
mod dataset;
mod drift;
mod sampling;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use channel::{gate_channel, sequence_probability, NoisyGateSet};
pub use dataset::{Dataset, DatasetMetadata, DatasetRow};
pub use drift::{drift_value, DriftConfig, DriftKind, DriftTarget, DriftTrajectory};
pub use sampling::{
    randomization_seed, sample_counts, sample_dataset, Arm, BlockRecord, SampledData, Schedule,
    ORDERING,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid noise configuration: {0}")]
    InvalidNoise(String),
    #[error("invalid SPAM configuration: {0}")]
    InvalidSpam(String),
    #[error("invalid sampling request: {0}")]
    InvalidSampling(String),
    #[error("malformed dataset: {0}")]
    MalformedDataset(String),
}

/// Where the per-gate error is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Attachment {
    /// One gate-independent error after every Clifford.
    #[default]
    GateLevel,
    /// Error after each physical `X_π/2` of the diatomic form; Z updates are
    /// perfect.
    PulseLevel,
}

/// Per-gate error model. Rates are probabilities per gate (per physical pulse
/// in pulse-level attachment); angles are radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub overrotation_eps: f64,
    pub axis_tilt: f64,
    pub depolarizing_rate: f64,
    pub amp_damping_gamma: f64,
    pub dephasing_rate: f64,
    pub drift: DriftConfig,
    pub attachment: Attachment,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::ideal()
    }
}

/// Coherence numbers of the reference transmon; 50 ns per gate.
pub const T1_SECONDS: f64 = 10e-6;
pub const T2_SECONDS: f64 = 13e-6;
pub const GATE_SECONDS: f64 = 50e-9;

impl NoiseConfig {
    pub fn ideal() -> NoiseConfig {
        NoiseConfig {
            overrotation_eps: 0.0,
            axis_tilt: 0.0,
            depolarizing_rate: 0.0,
            amp_damping_gamma: 0.0,
            dephasing_rate: 0.0,
            drift: DriftConfig::none(),
            attachment: Attachment::GateLevel,
        }
    }

    /// Amplitude damping and pure dephasing for a gate of duration `gate`
    /// on a qubit with the given `T1`, `T2`.
    pub fn from_coherence(t1: f64, t2: f64, gate: f64) -> NoiseConfig {
        let gamma = 1.0 - (-gate / t1).exp();
        // 1/Tφ = 1/T2 - 1/(2 T1); phase-flip probability p has 1 - 2p = exp(-t/Tφ).
        let rate_phi = (1.0 / t2 - 0.5 / t1).max(0.0);
        let p_phase = 0.5 * (1.0 - (-gate * rate_phi).exp());
        NoiseConfig {
            amp_damping_gamma: gamma,
            dephasing_rate: p_phase,
            ..NoiseConfig::ideal()
        }
    }

    pub fn transmon_preset() -> NoiseConfig {
        NoiseConfig::from_coherence(T1_SECONDS, T2_SECONDS, GATE_SECONDS)
    }

    /// Preset coherence plus 0.02 rad over-rotation and a 0.05 rad sinusoidal
    /// detuning-phase drift.
    pub fn coherent_with_drift() -> NoiseConfig {
        NoiseConfig {
            overrotation_eps: 0.02,
            drift: DriftConfig::sinusoid(0.05, 5_000.0),
            ..NoiseConfig::transmon_preset()
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let rates = [
            ("depolarizing_rate", self.depolarizing_rate),
            ("amp_damping_gamma", self.amp_damping_gamma),
            ("dephasing_rate", self.dephasing_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(NoiseError::InvalidNoise(format!("{name} = {r} not in [0, 1]")));
            }
        }
        for (name, v) in [
            ("overrotation_eps", self.overrotation_eps),
            ("axis_tilt", self.axis_tilt),
        ] {
            if !v.is_finite() {
                return Err(NoiseError::InvalidNoise(format!("{name} is not finite")));
            }
        }
        self.drift.validate()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("noise config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// State preparation and measurement. `rho` and `effect` are Pauli-basis
/// vectors (`Tr(B_i ρ)`, `Tr(B_i E)`); the error probabilities flip the
/// prepared state and the reported outcome respectively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpamConfig {
    pub rho: [f64; 4],
    pub effect: [f64; 4],
    pub prep_error: f64,
    pub meas_error: f64,
}

impl Default for SpamConfig {
    fn default() -> Self {
        SpamConfig {
            rho: [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2],
            effect: [FRAC_1_SQRT_2, 0.0, 0.0, -FRAC_1_SQRT_2],
            prep_error: 0.0,
            meas_error: 0.0,
        }
    }
}

impl SpamConfig {
    pub fn with_errors(prep_error: f64, meas_error: f64) -> SpamConfig {
        SpamConfig {
            prep_error,
            meas_error,
            ..SpamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, r) in [("prep_error", self.prep_error), ("meas_error", self.meas_error)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(NoiseError::InvalidSpam(format!("{name} = {r} not in [0, 1]")));
            }
        }
        let bloch = |v: &[f64; 4]| (v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
        let tol = 1e-12;
        if (self.rho[0] - FRAC_1_SQRT_2).abs() > tol || bloch(&self.rho) > FRAC_1_SQRT_2 + tol {
            return Err(NoiseError::InvalidSpam("rho is not a density matrix".into()));
        }
        // Eigenvalues of the effect are (e_0 ± |e|)/√2.
        let lo = (self.effect[0] - bloch(&self.effect)) * FRAC_1_SQRT_2;
        let hi = (self.effect[0] + bloch(&self.effect)) * FRAC_1_SQRT_2;
        if lo < -tol || hi > 1.0 + tol {
            return Err(NoiseError::InvalidSpam("effect is not a POVM element".into()));
        }
        Ok(())
    }

    /// Prepared state after the preparation flip.
    pub fn effective_rho(&self) -> nalgebra::Vector4<f64> {
        let q = self.prep_error;
        let r = &self.rho;
        // X conjugation flips the Y and Z components.
        nalgebra::Vector4::new(r[0], r[1], (1.0 - 2.0 * q) * r[2], (1.0 - 2.0 * q) * r[3])
    }

    /// `E' = (1 - m) E + m (I - E)`.
    pub fn effective_effect(&self) -> nalgebra::Vector4<f64> {
        let m = self.meas_error;
        let e = &self.effect;
        let id0 = std::f64::consts::SQRT_2;
        nalgebra::Vector4::new(
            (1.0 - m) * e[0] + m * (id0 - e[0]),
            (1.0 - 2.0 * m) * e[1],
            (1.0 - 2.0 * m) * e[2],
            (1.0 - 2.0 * m) * e[3],
        )
    }
}
