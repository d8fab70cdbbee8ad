use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pfr_core::estimation::{FitReport, GateSetModel};
use pfr_core::gst_design::GstDesign;
use pfr_core::metrics::MetricsReport;
use pfr_core::pfr::{parse_circuit_list, verify_equivalence, RandomizedCircuit};

fn pfrlab(out: &Path, config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfrlab"))
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3"])
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn subcommands_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let config = out.join("small.toml");
    fs::write(&config, "l_max = 2\nshots_per_sequence = 100\nn_randomizations = 100\nrepetitions = 1\nbootstrap_resamples = 0\n").unwrap();

    ok(pfrlab(out, &config, &["design"]));
    let design = GstDesign::read_json(&out.join("design.json")).unwrap();
    assert_eq!(design.max_length(), 2);

    let circuits = out.join("circuits.txt");
    fs::write(&circuits, "# two circuits\nGx Gy Gi\nGy\n").unwrap();
    ok(pfrlab(out, &config, &["randomize", "--input", circuits.to_str().unwrap(), "--count", "3"]));
    let lines = fs::read_to_string(out.join("randomized.txt")).unwrap();
    let sources = parse_circuit_list(&fs::read_to_string(&circuits).unwrap()).unwrap();
    let parsed: Vec<RandomizedCircuit> = lines.lines().map(|l| RandomizedCircuit::from_line(l).unwrap()).collect();
    assert_eq!(parsed.len(), 6);
    for (i, rc) in parsed.iter().enumerate() {
        assert!(verify_equivalence(&sources[i / 3], rc));
    }

    ok(pfrlab(out, &config, &["simulate"]));
    assert!(out.join("plain.csv").is_file() && out.join("randomized.meta.json").is_file());

    let dataset = out.join("randomized.csv");
    ok(pfrlab(out, &config, &["fit", "--dataset", dataset.to_str().unwrap()]));
    let report = FitReport::from_json(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert!(report.n_sigma_h1.is_finite());
    GateSetModel::from_json(&fs::read_to_string(out.join("model_h1.json")).unwrap()).unwrap();

    let model = out.join("model_h1.json");
    let csv = ok(pfrlab(out, &config, &["metrics", "--model", model.to_str().unwrap()]));
    assert_eq!(csv.lines().count(), 4);
    let m = MetricsReport::from_json(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m.gates.len(), 3);
}

#[test]
fn run_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "l_max = 2\nshots_per_sequence = 50\nn_randomizations = 50\nrepetitions = 1\nbootstrap_resamples = 0\n").unwrap();
    let stdout = ok(pfrlab(dir.path(), &config, &["run"]));
    assert!(stdout.contains("N_sigma(H1)"));
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"status\": \"complete\""));
}

#[test]
fn bad_config_fails_at_the_config_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "shots_per_sequence = 33\n").unwrap();
    let o = pfrlab(dir.path(), &config, &["run"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("config stage failed"));
}
