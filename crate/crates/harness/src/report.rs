use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use pfr_core::noise::Arm;
use pfr_core::pauli_algebra::CliffordIndex;

use crate::config::ExperimentConfig;
use crate::experiment::{unix_now, Manifest, RepetitionResult, RunArtifacts, StageError};
use crate::svg::{bar_chart, heatmap, line_chart, BarGroup, Series};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub const N_SIGMA_CSV: &str = "n_sigma.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const PTM_CSV: &str = "ptm.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const CONFIG_TOML: &str = "config.toml";
pub const DESIGN_JSON: &str = "design.json";
pub const DESIGN_TXT: &str = "design.txt";

const ARMS: [Arm; 2] = [Arm::Randomized, Arm::Plain];

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io {
        path: PathBuf::from("<memory>"),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per repetition, arm and hypothesis (H1, H2).
pub fn n_sigma_csv(reps: &[RepetitionResult]) -> Result<String, ReportError> {
    let mut rows = Vec::new();
    for rep in reps {
        for arm in ARMS {
            let f = &rep.arm(arm).fit;
            for (h, n, l, d) in [("H1", f.n_sigma_h1, f.logl_h1, f.dof_h1), ("H2", f.n_sigma_h2, f.logl_h2, f.dof_h2)] {
                rows.push(vec![
                    rep.index.to_string(),
                    arm.as_str().to_string(),
                    h.to_string(),
                    n.to_string(),
                    l.to_string(),
                    d.to_string(),
                    f.logl_h0.to_string(),
                    f.dof_h0.to_string(),
                ]);
            }
        }
    }
    csv_string(&["repetition", "arm", "hypothesis", "n_sigma", "logL", "dof", "logL_h0", "dof_h0"], rows)
}

/// One row per repetition, arm and gate.
pub fn metrics_csv(reps: &[RepetitionResult]) -> Result<String, ReportError> {
    let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut rows = Vec::new();
    for rep in reps {
        for arm in ARMS {
            for g in &rep.arm(arm).metrics.gates {
                rows.push(vec![
                    rep.index.to_string(),
                    arm.as_str().to_string(),
                    g.gate.clone(),
                    g.infidelity.to_string(),
                    g.diamond_distance.to_string(),
                    cell(g.ci95.map(|c| c.0)),
                    cell(g.ci95.map(|c| c.1)),
                    cell(g.infidelity_ci95.map(|c| c.0)),
                    cell(g.infidelity_ci95.map(|c| c.1)),
                ]);
            }
        }
    }
    csv_string(
        &["repetition", "arm", "gate", "infidelity", "diamond", "ci_lo", "ci_hi", "infidelity_ci_lo", "infidelity_ci_hi"],
        rows,
    )
}

/// Every H1 transfer-matrix entry with its bootstrap interval.
pub fn ptm_csv(reps: &[RepetitionResult]) -> Result<String, ReportError> {
    let mut rows = Vec::new();
    for rep in reps {
        for arm in ARMS {
            let a = rep.arm(arm);
            for (g, (c, r)) in a.h1.gates.iter().enumerate() {
                for e in 0..16 {
                    let ci = a.ptm_ci.as_ref().map(|ci| ci[16 * g + e]);
                    rows.push(vec![
                        rep.index.to_string(),
                        arm.as_str().to_string(),
                        c.label(),
                        (e / 4).to_string(),
                        (e % 4).to_string(),
                        r.0[(e / 4, e % 4)].to_string(),
                        ci.map(|c| c.0.to_string()).unwrap_or_default(),
                        ci.map(|c| c.1.to_string()).unwrap_or_default(),
                    ]);
                }
            }
        }
    }
    csv_string(&["repetition", "arm", "gate", "row", "col", "value", "ci_lo", "ci_hi"], rows)
}

struct Writer<'a> {
    root: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn put(&mut self, rel: &str, contents: &str) -> Result<(), ReportError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
        }
        fs::write(&path, contents).map_err(|source| ReportError::Io { path: path.clone(), source })?;
        self.files.push(rel.to_string());
        Ok(())
    }
}

fn gi_rows(r: &pfr_core::pauli_algebra::Ptm) -> [[f64; 4]; 4] {
    r.rows()
}

/// Writes every table, model, figure and the manifest under `out`. Paths
/// are fixed; the manifest lists them relative to `out`.
pub fn emit_reports(artifacts: &mut RunArtifacts, out: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut w = Writer { root: out, files: Vec::new() };
    w.put(CONFIG_TOML, &artifacts.config.to_toml())?;
    w.put(DESIGN_JSON, &artifacts.design.to_json())?;
    w.put(DESIGN_TXT, &artifacts.design.to_circuit_text())?;

    for rep in &artifacts.repetitions {
        for a in &rep.arms {
            let dir = format!("rep{}", rep.index);
            let name = a.arm.as_str();
            w.put(&format!("{dir}/{name}.csv"), &a.dataset.to_csv())?;
            w.put(
                &format!("{dir}/{name}.meta.json"),
                &(serde_json::to_string_pretty(&a.dataset.metadata).expect("metadata serializes") + "\n"),
            )?;
            w.put(&format!("{dir}/fit_{name}.json"), &a.fit.to_json())?;
            w.put(&format!("{dir}/model_h1_{name}.json"), &a.h1.to_json())?;
            w.put(&format!("{dir}/model_h2_{name}.json"), &a.h2.to_json())?;
            w.put(&format!("{dir}/metrics_{name}.json"), &a.metrics.to_json())?;
            w.put(&format!("{dir}/metrics_{name}.csv"), &a.metrics.to_csv())?;
            if let Some(gi) = a.h1.gate(CliffordIndex::identity()) {
                let svg = heatmap(
                    &format!("Gi, {name} arm, repetition {}", rep.index),
                    &gi_rows(gi),
                    a.gate_ci(CliffordIndex::identity()),
                );
                w.put(&format!("figures/gi_rep{}_{name}.svg", rep.index), &svg)?;
            }
        }
    }

    w.put(N_SIGMA_CSV, &n_sigma_csv(&artifacts.repetitions)?)?;
    w.put(METRICS_CSV, &metrics_csv(&artifacts.repetitions)?)?;
    w.put(PTM_CSV, &ptm_csv(&artifacts.repetitions)?)?;
    w.put("figures/n_sigma.svg", &n_sigma_figure(&artifacts.repetitions))?;
    w.put("figures/metrics.svg", &metrics_figure(&artifacts.repetitions, false))?;
    w.put("figures/infidelity.svg", &metrics_figure(&artifacts.repetitions, true))?;

    let m = &mut artifacts.manifest;
    m.files = w.files.clone();
    m.files.push(MANIFEST_JSON.into());
    m.completed_stages.push("report".into());
    m.status = "complete".into();
    m.finished_unix = Some(unix_now());
    let manifest = m.to_json();
    w.put(MANIFEST_JSON, &manifest)?;
    Ok(w.files.iter().map(|f| out.join(f)).collect())
}

/// Manifest for a run that stopped at `err`.
pub fn write_failure_manifest(config: &ExperimentConfig, err: &StageError, out: &Path) -> Result<PathBuf, ReportError> {
    let mut m = Manifest::new(config);
    m.status = "failed".into();
    m.completed_stages = err.completed.clone();
    m.failed_stage = Some(err.stage.to_string());
    m.error = Some(err.message.clone());
    m.finished_unix = Some(unix_now());
    fs::create_dir_all(out).map_err(|source| ReportError::Io { path: out.to_path_buf(), source })?;
    let path = out.join(MANIFEST_JSON);
    fs::write(&path, m.to_json()).map_err(|source| ReportError::Io { path: path.clone(), source })?;
    Ok(path)
}

fn n_sigma_figure(reps: &[RepetitionResult]) -> String {
    let mut series = Vec::new();
    for arm in ARMS {
        for h in ["H1", "H2"] {
            let points = reps
                .iter()
                .map(|r| {
                    let f = &r.arm(arm).fit;
                    (r.index as f64, if h == "H1" { f.n_sigma_h1 } else { f.n_sigma_h2 })
                })
                .collect();
            series.push(Series { name: format!("{} {h}", arm.as_str()), points });
        }
    }
    line_chart("Model violation per repetition", "repetition", "N_sigma (symlog)", &series)
}

/// Mean over repetitions per gate and arm; whiskers span the first
/// repetition's interval.
fn metrics_figure(reps: &[RepetitionResult], infidelity: bool) -> String {
    let names: Vec<String> = ARMS.iter().map(|a| a.as_str().to_string()).collect();
    let gates: Vec<String> = reps
        .first()
        .map(|r| r.arms[0].metrics.gates.iter().map(|g| g.gate.clone()).collect())
        .unwrap_or_default();
    let groups: Vec<BarGroup> = gates
        .iter()
        .enumerate()
        .map(|(gi, label)| BarGroup {
            label: label.clone(),
            values: ARMS
                .iter()
                .map(|&arm| {
                    let vals: Vec<f64> = reps
                        .iter()
                        .map(|r| {
                            let g = &r.arm(arm).metrics.gates[gi];
                            if infidelity { g.infidelity } else { g.diamond_distance }
                        })
                        .collect();
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let g0 = &reps[0].arm(arm).metrics.gates[gi];
                    (mean, if infidelity { g0.infidelity_ci95 } else { g0.ci95 })
                })
                .collect(),
        })
        .collect();
    if infidelity {
        bar_chart("Average gate infidelity", "infidelity", &names, &groups)
    } else {
        bar_chart("Diamond distance (full norm)", "diamond distance", &names, &groups)
    }
}
