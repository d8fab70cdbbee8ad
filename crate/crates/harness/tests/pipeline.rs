use std::fs;
use std::path::Path;

use pfr_core::estimation::{gauge_optimize_physical, GateSetModel};
use pfr_core::gst_design::{standard_design, target_gates};
use pfr_core::metrics::diamond_distance;
use pfr_core::noise::{sample_dataset, Arm, NoiseConfig, Schedule, SpamConfig};

use pfr_harness::config::{ExperimentConfig, Profile};
use pfr_harness::experiment::{run_experiment, Manifest, RunArtifacts};
use pfr_harness::report::{emit_reports, n_sigma_csv, write_failure_manifest, N_SIGMA_CSV};

fn small(noise: NoiseConfig, bootstrap: usize) -> ExperimentConfig {
    ExperimentConfig {
        l_max: 4,
        shots_per_sequence: 250,
        n_randomizations: 250,
        repetitions: 1,
        bootstrap_resamples: bootstrap,
        noise,
        spam: SpamConfig::default(),
        ..ExperimentConfig::profile(Profile::Quick)
    }
}

fn run_into(cfg: &ExperimentConfig, out: &Path) -> RunArtifacts {
    let mut a = run_experiment(cfg).unwrap();
    emit_reports(&mut a, out).unwrap();
    a
}

#[test]
fn zero_noise_run_fits_and_recovers_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_into(&small(NoiseConfig::ideal(), 0), dir.path());
    let target = GateSetModel::target(&target_gates());
    for a in &run.repetitions[0].arms {
        assert!(a.fit.n_sigma_h1 <= 3.0, "{:?} H1 {}", a.arm, a.fit.n_sigma_h1);
        assert!(a.fit.n_sigma_h2 <= 3.0, "{:?} H2 {}", a.arm, a.fit.n_sigma_h2);
        let aligned = gauge_optimize_physical(&a.h1, &target).unwrap().model;
        for (c, r) in &aligned.gates {
            let d = diamond_distance(r, &c.ptm()).unwrap();
            assert!(d <= 1e-2, "{:?} {c}: {d}", a.arm);
        }
    }
}

#[test]
fn reports_are_complete_and_replayable() {
    let cfg = ExperimentConfig { repetitions: 2, ..small(NoiseConfig::coherent_with_drift(), 0) };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_into(&cfg, d1.path());

    let rows = n_sigma_csv(&first.repetitions).unwrap().lines().count() - 1;
    assert_eq!(rows, 2 * 2 * 2);

    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(d1.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.status, "complete");
    for f in &manifest.files {
        assert!(d1.path().join(f).is_file(), "missing {f}");
    }

    // Replay from the manifest's own config.
    run_into(&manifest.config, d2.path());
    for f in manifest.files.iter().filter(|f| f.as_str() != "manifest.json") {
        let a = fs::read(d1.path().join(f)).unwrap();
        let b = fs::read(d2.path().join(f)).unwrap();
        assert!(a == b, "{f} differs on replay");
    }
    assert!(fs::read_to_string(d1.path().join(N_SIGMA_CSV)).unwrap().starts_with("repetition,arm,hypothesis"));
}

#[test]
fn every_shot_lands_in_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(NoiseConfig::coherent_with_drift(), 0);
    let run = run_into(&cfg, dir.path());
    let rep = &run.repetitions[0];
    let counted: u64 = rep.arms.iter().map(|a| a.dataset.total_shots()).sum();
    assert_eq!(counted, rep.total_shots);
    assert_eq!(counted, 2 * cfg.shots_per_sequence * run.design.len() as u64);
}

#[test]
fn arms_share_the_drift_clock_in_alternating_blocks() {
    let cfg = small(NoiseConfig::coherent_with_drift(), 0);
    let design = standard_design(cfg.l_max).unwrap();
    let data = sample_dataset(
        &design.circuits(),
        cfg.shots_per_sequence,
        &cfg.noise,
        &cfg.spam,
        7,
        &Schedule::interleaved(cfg.interleave_block),
    )
    .unwrap();
    let mut clock = 0;
    for (i, b) in data.blocks.iter().enumerate() {
        let expected = if i % 2 == 0 { Arm::Randomized } else { Arm::Plain };
        assert_eq!(b.arm, expected);
        assert_eq!(b.first_shot_index, clock);
        assert_eq!(b.shots, cfg.interleave_block);
        clock += b.shots;
    }
    assert_eq!(clock, data.total_shots);
}

#[test]
fn failure_manifest_records_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { shots_per_sequence: 251, ..small(NoiseConfig::ideal(), 0) };
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.stage.as_str(), "config");
    let path = write_failure_manifest(&cfg, &err, dir.path()).unwrap();
    let m: Manifest = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(m.status, "failed");
    assert_eq!(m.failed_stage.as_deref(), Some("config"));
}
