use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use pfr_core::estimation::{
    fit_hypotheses, refine_h1_mle, FitOptions, FitReport, GateSetModel, MleOptions, Observations,
};
use pfr_core::gst_design::{standard_design, target_gates, GstDesign};
use pfr_core::metrics::{bootstrap_ci, metric_vector, ptm_entries, MetricsError, MetricsReport};
use pfr_core::noise::{randomization_seed, sample_dataset, Arm, Dataset, Schedule, ORDERING};
use pfr_core::pauli_algebra::CliffordIndex;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Design,
    Simulate,
    Fit,
    Metrics,
    Bootstrap,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Design => "design",
            Stage::Simulate => "simulate",
            Stage::Fit => "fit",
            Stage::Metrics => "metrics",
            Stage::Bootstrap => "bootstrap",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
    /// Stages finished before the failure, e.g. `"rep0/randomized/fit"`.
    pub completed: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ArmResult {
    pub arm: Arm,
    pub dataset: Dataset,
    pub fit: FitReport,
    /// Gauge-optimized to the target.
    pub h1: GateSetModel,
    pub h2: GateSetModel,
    pub metrics: MetricsReport,
    /// 95 % intervals for every transfer-matrix entry of every gate, in model
    /// gate order, row-major.
    pub ptm_ci: Option<Vec<(f64, f64)>>,
}

impl ArmResult {
    pub fn gate_ci(&self, gate: CliffordIndex) -> Option<&[(f64, f64)]> {
        let g = self.h1.gate_index(gate)?;
        self.ptm_ci.as_deref().map(|ci| &ci[16 * g..16 * g + 16])
    }
}

#[derive(Debug, Clone)]
pub struct RepetitionResult {
    pub index: u32,
    pub seed: u64,
    pub total_shots: u64,
    pub arms: Vec<ArmResult>,
}

impl RepetitionResult {
    pub fn arm(&self, arm: Arm) -> &ArmResult {
        self.arms.iter().find(|a| a.arm == arm).expect("both arms are always fitted")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepetitionManifest {
    pub index: u32,
    pub seed: u64,
    pub total_shots: u64,
    pub bootstrap_seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub status: String,
    pub config_digest: String,
    pub config: ExperimentConfig,
    pub design_sequences: usize,
    pub design_digest: String,
    pub ordering: String,
    pub repetitions: Vec<RepetitionManifest>,
    pub completed_stages: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub files: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub design: GstDesign,
    pub repetitions: Vec<RepetitionResult>,
    pub manifest: Manifest,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn repetition_seed(master: u64, rep: u32) -> u64 {
    randomization_seed(master, u64::from(rep), 0)
}

fn bootstrap_seed(rep_seed: u64, arm: Arm) -> u64 {
    randomization_seed(rep_seed, 1, arm as u64 + 1)
}

pub fn design_digest(design: &GstDesign) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(design.to_json().as_bytes()))
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Manifest {
        Manifest {
            tool: "pfrlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            status: "running".into(),
            config_digest: config.digest(),
            config: config.clone(),
            design_sequences: 0,
            design_digest: String::new(),
            ordering: ORDERING.into(),
            repetitions: Vec::new(),
            completed_stages: Vec::new(),
            failed_stage: None,
            error: None,
            files: Vec::new(),
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Infidelity and diamond distance per gate followed by every transfer
/// matrix entry, for one refit.
fn bootstrap_vector(model: &GateSetModel) -> Result<Vec<f64>, MetricsError> {
    let mut v = metric_vector(model)?;
    for (_, r) in &model.gates {
        v.extend(ptm_entries(r));
    }
    Ok(v)
}

fn stage_err(stage: Stage, e: impl std::fmt::Display) -> StageError {
    StageError {
        stage,
        message: e.to_string(),
        completed: Vec::new(),
    }
}

/// Fits one arm's dataset under all hypotheses and computes its metrics
/// and, when `resamples > 0`, bootstrap intervals.
pub fn analyze_arm(
    arm: Arm,
    dataset: Dataset,
    design: &GstDesign,
    mle: &MleOptions,
    resamples: usize,
    seed: u64,
) -> Result<ArmResult, StageError> {
    let obs = Observations::from_dataset(&dataset, design, &target_gates()).map_err(|e| stage_err(Stage::Fit, e))?;
    let out = fit_hypotheses(&obs, design, &FitOptions { mle: *mle }).map_err(|e| stage_err(Stage::Fit, e))?;
    let mut metrics = MetricsReport::from_model(&out.h1).map_err(|e| stage_err(Stage::Metrics, e))?;
    let mut ptm_ci = None;
    if resamples > 0 {
        let ci = bootstrap_ci(&obs, &out.h1, resamples, seed, |o| {
            let fit = refine_h1_mle(o, &out.h1, mle)?;
            bootstrap_vector(&fit.model)
        })
        .map_err(|e| stage_err(Stage::Bootstrap, e))?;
        let n_metrics = 2 * out.h1.gates.len();
        metrics = metrics.with_intervals(&ci[..n_metrics]);
        ptm_ci = Some(ci[n_metrics..].to_vec());
    }
    Ok(ArmResult {
        arm,
        dataset,
        fit: out.report,
        h1: out.h1,
        h2: out.h2,
        metrics,
        ptm_ci,
    })
}

/// Runs every repetition: one interleaved randomized/plain schedule over a
/// shared drift clock, then estimation and metrics per arm.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts, StageError> {
    let mut manifest = Manifest::new(config);
    let fail = |stage: Stage, message: String, manifest: &Manifest| StageError {
        stage,
        message,
        completed: manifest.completed_stages.clone(),
    };
    config.validate().map_err(|e| fail(Stage::Config, e.to_string(), &manifest))?;
    manifest.completed_stages.push("config".into());

    let design = standard_design(config.l_max).map_err(|e| fail(Stage::Design, e.to_string(), &manifest))?;
    manifest.design_sequences = design.len();
    manifest.design_digest = design_digest(&design);
    manifest.completed_stages.push("design".into());
    let circuits = design.circuits();

    let mut schedule = Schedule::interleaved(config.interleave_block);
    schedule.n_randomizations = Some(config.n_randomizations);

    let mut repetitions = Vec::new();
    for rep in 0..config.repetitions {
        let seed = repetition_seed(config.master_seed, rep);
        log::info!("repetition {rep}: sampling {} sequences", circuits.len());
        let data = sample_dataset(&circuits, config.shots_per_sequence, &config.noise, &config.spam, seed, &schedule)
            .map_err(|e| fail(Stage::Simulate, e.to_string(), &manifest))?;
        manifest.completed_stages.push(format!("rep{rep}/simulate"));

        let mut arms = Vec::new();
        let mut bootstrap_seeds = Vec::new();
        for arm in [Arm::Randomized, Arm::Plain] {
            let dataset = data.arm(arm).expect("interleaved schedule has both arms").clone();
            let bseed = bootstrap_seed(seed, arm);
            bootstrap_seeds.push(bseed);
            log::info!("repetition {rep}: fitting {} arm", arm.as_str());
            let result = analyze_arm(arm, dataset, &design, &config.mle, config.bootstrap_resamples, bseed)
                .map_err(|e| fail(e.stage, e.message, &manifest))?;
            log::info!(
                "repetition {rep} {}: N_sigma(H1) = {:.2}, N_sigma(H2) = {:.2}",
                arm.as_str(),
                result.fit.n_sigma_h1,
                result.fit.n_sigma_h2
            );
            manifest.completed_stages.push(format!("rep{rep}/{}/fit", arm.as_str()));
            arms.push(result);
        }
        manifest.repetitions.push(RepetitionManifest {
            index: rep,
            seed,
            total_shots: data.total_shots,
            bootstrap_seeds,
        });
        repetitions.push(RepetitionResult {
            index: rep,
            seed,
            total_shots: data.total_shots,
            arms,
        });
    }
    manifest.status = "computed".into();
    Ok(RunArtifacts {
        config: config.clone(),
        design,
        repetitions,
        manifest,
    })
}
