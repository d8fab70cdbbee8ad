use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::NoiseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    #[default]
    Sinusoid,
    /// Gaussian increments with standard deviation `amplitude / √period`.
    RandomWalk,
}

/// What the drifting angle couples to. The detuning phase is a Z rotation by
/// the drift angle after every gate (every pulse in pulse-level attachment).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DriftTarget {
    #[default]
    DetuningPhase,
}

/// Slow drift, frozen within a shot and indexed by the global shot counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub amplitude: f64,
    /// In shots.
    pub period: f64,
    pub kind: DriftKind,
    pub target: DriftTarget,
    /// Seeds the random-walk increments.
    pub seed: u64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig::none()
    }
}

impl DriftConfig {
    pub fn none() -> DriftConfig {
        DriftConfig {
            amplitude: 0.0,
            period: 1.0,
            kind: DriftKind::Sinusoid,
            target: DriftTarget::DetuningPhase,
            seed: 0,
        }
    }

    pub fn sinusoid(amplitude: f64, period: f64) -> DriftConfig {
        DriftConfig {
            amplitude,
            period,
            ..DriftConfig::none()
        }
    }

    pub fn random_walk(amplitude: f64, period: f64, seed: u64) -> DriftConfig {
        DriftConfig {
            amplitude,
            period,
            kind: DriftKind::RandomWalk,
            seed,
            ..DriftConfig::none()
        }
    }

    pub fn is_static(&self) -> bool {
        self.amplitude == 0.0
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !self.amplitude.is_finite() {
            return Err(NoiseError::InvalidNoise("drift amplitude is not finite".into()));
        }
        if !(self.period >= 1.0) {
            return Err(NoiseError::InvalidNoise(format!(
                "drift period {} must be at least 1 shot",
                self.period
            )));
        }
        Ok(())
    }

    fn step_std(&self) -> f64 {
        self.amplitude / self.period.sqrt()
    }
}

/// Drift angle at a given shot. Random walks are replayed from the start;
/// use [`DriftTrajectory`] for sequential access.
pub fn drift_value(shot_index: u64, cfg: &DriftConfig) -> f64 {
    DriftTrajectory::new(cfg).value_at(shot_index)
}

/// Sequential evaluator for the drift angle.
#[derive(Debug, Clone)]
pub struct DriftTrajectory {
    cfg: DriftConfig,
    rng: ChaCha8Rng,
    index: u64,
    value: f64,
}

impl DriftTrajectory {
    pub fn new(cfg: &DriftConfig) -> DriftTrajectory {
        DriftTrajectory {
            cfg: cfg.clone(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            index: 0,
            value: 0.0,
        }
    }

    pub fn config(&self) -> &DriftConfig {
        &self.cfg
    }

    /// O(1) for sinusoids; for random walks O(1) amortized when indices do not
    /// decrease (a decrease replays from zero).
    pub fn value_at(&mut self, shot_index: u64) -> f64 {
        if self.cfg.amplitude == 0.0 {
            return 0.0;
        }
        match self.cfg.kind {
            DriftKind::Sinusoid => {
                let phase = std::f64::consts::TAU * (shot_index as f64) / self.cfg.period;
                self.cfg.amplitude * phase.sin()
            }
            DriftKind::RandomWalk => {
                if shot_index < self.index {
                    *self = DriftTrajectory::new(&self.cfg);
                }
                let sigma = self.cfg.step_std();
                while self.index < shot_index {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    self.value += sigma * z;
                    self.index += 1;
                }
                self.value
            }
        }
    }
}
