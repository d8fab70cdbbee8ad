use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use pfr_core::estimation::MleOptions;
use pfr_core::metrics::MIN_RESAMPLES;
use pfr_core::noise::{NoiseConfig, SpamConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Desk-scale suite: L ≤ 64, 250 shots, 2 repetitions.
    #[default]
    Quick,
    /// Full-scale run: L ≤ 1024, 1000 shots, 7 repetitions.
    Paper,
}

/// Everything needed to reproduce a run. TOML keys match the field names;
/// `[noise]`, `[noise.drift]`, `[spam]` and `[mle]` are sub-tables and any
/// omitted key keeps its profile default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub l_max: u32,
    pub shots_per_sequence: u64,
    pub n_randomizations: u64,
    pub interleave_block: u64,
    pub repetitions: u32,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Parametric bootstrap resamples per arm; 0 skips intervals.
    pub bootstrap_resamples: usize,
    pub noise: NoiseConfig,
    pub spam: SpamConfig,
    pub mle: MleOptions,
}

impl ExperimentConfig {
    pub fn profile(p: Profile) -> ExperimentConfig {
        let quick = ExperimentConfig {
            l_max: 64,
            shots_per_sequence: 250,
            n_randomizations: 250,
            interleave_block: 10,
            repetitions: 2,
            master_seed: 1,
            output_dir: PathBuf::from("pfrlab-out"),
            bootstrap_resamples: 100,
            noise: NoiseConfig::coherent_with_drift(),
            spam: SpamConfig::with_errors(0.01, 0.02),
            mle: MleOptions::default(),
        };
        match p {
            Profile::Quick => quick,
            Profile::Paper => ExperimentConfig {
                l_max: 1024,
                shots_per_sequence: 1000,
                n_randomizations: 1000,
                repetitions: 7,
                ..quick
            },
        }
    }

    /// Profile defaults overlaid with the keys present in `text`.
    pub fn from_toml_str(text: &str, p: Profile) -> Result<ExperimentConfig, ConfigError> {
        let mut base = toml::Value::try_from(ExperimentConfig::profile(p))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let overlay: toml::Table = toml::from_str(text)?;
        merge(&mut base, toml::Value::Table(overlay));
        let cfg: ExperimentConfig = base.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, p: Profile) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ExperimentConfig::from_toml_str(&text, p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.l_max == 0 {
            return bad("l_max must be at least 1".into());
        }
        if self.interleave_block == 0 || !self.shots_per_sequence.is_multiple_of(self.interleave_block) {
            return bad(format!(
                "shots_per_sequence {} is not a positive multiple of interleave_block {}",
                self.shots_per_sequence, self.interleave_block
            ));
        }
        if self.shots_per_sequence == 0 {
            return bad("shots_per_sequence must be positive".into());
        }
        if self.n_randomizations == 0 {
            return bad("n_randomizations must be positive".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be positive".into());
        }
        if self.bootstrap_resamples != 0 && self.bootstrap_resamples < MIN_RESAMPLES {
            return bad(format!("bootstrap_resamples must be 0 or at least {MIN_RESAMPLES}"));
        }
        self.noise.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.spam.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
