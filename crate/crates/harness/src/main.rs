use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pfr_core::estimation::{fit_hypotheses, FitOptions, GateSetModel, Observations};
use pfr_core::gst_design::{standard_design, target_gates, GstDesign};
use pfr_core::metrics::MetricsReport;
use pfr_core::noise::{randomization_seed, sample_dataset, Arm, Dataset, Schedule};
use pfr_core::pfr::{parse_circuit_list, randomize};

use pfr_harness::config::{ExperimentConfig, Profile};
use pfr_harness::experiment::{analyze_arm, repetition_seed, run_experiment, Stage};
use pfr_harness::report::{emit_reports, write_failure_manifest};

#[derive(Parser)]
#[command(name = "pfrlab", version, about = "Pauli-frame randomized gate-set tomography in simulation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file overlaid on the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Profile::Quick)]
    profile: Profile,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the standard design for the configured `l_max`.
    Design,
    /// Randomize every circuit of a circuit list, one line per circuit.
    Randomize {
        #[arg(long)]
        input: PathBuf,
        /// Randomizations per circuit.
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Sample both arms of one repetition over the design.
    Simulate {
        /// Design JSON; defaults to the standard design.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Fit H0, H1 and H2 to a dataset.
    Fit {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Gate metrics of a model, with bootstrap intervals when a dataset is given.
    Metrics {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, requires = "design")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// The full pipeline: every repetition, both arms, all reports.
    Run,
}

struct Failure {
    stage: Stage,
    error: anyhow::Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, Failure> {
        self.map_err(|e| Failure { stage, error: e.into() })
    }
}

fn load_config(c: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p, c.profile)?,
        None => ExperimentConfig::profile(c.profile),
    };
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_design(path: Option<&Path>, cfg: &ExperimentConfig) -> anyhow::Result<GstDesign> {
    Ok(match path {
        Some(p) => GstDesign::read_json(p)?,
        None => standard_design(cfg.l_max)?,
    })
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common).at(Stage::Config)?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::Design => {
            let design = standard_design(cfg.l_max).at(Stage::Design)?;
            write(&out.join("design.json"), &design.to_json()).at(Stage::Report)?;
            write(&out.join("design.txt"), &design.to_circuit_text()).at(Stage::Report)?;
            println!("{} sequences, longest {} gates", design.len(), design.max_flat_len());
        }
        Command::Randomize { input, count } => {
            let text = fs::read_to_string(input)
                .with_context(|| format!("reading {}", input.display()))
                .at(Stage::Design)?;
            let circuits = parse_circuit_list(&text).at(Stage::Design)?;
            let mut lines = String::new();
            for (i, c) in circuits.iter().enumerate() {
                for r in 0..*count {
                    let rc = randomize(c, randomization_seed(cfg.master_seed, i as u64, r)).at(Stage::Simulate)?;
                    lines.push_str(&rc.to_line());
                    lines.push('\n');
                }
            }
            write(&out.join("randomized.txt"), &lines).at(Stage::Report)?;
        }
        Command::Simulate { design } => {
            let design = load_design(design.as_deref(), &cfg).at(Stage::Design)?;
            let mut schedule = Schedule::interleaved(cfg.interleave_block);
            schedule.n_randomizations = Some(cfg.n_randomizations);
            let seed = repetition_seed(cfg.master_seed, 0);
            let data = sample_dataset(&design.circuits(), cfg.shots_per_sequence, &cfg.noise, &cfg.spam, seed, &schedule)
                .at(Stage::Simulate)?;
            for arm in [Arm::Randomized, Arm::Plain] {
                let ds = data.arm(arm).expect("interleaved schedule has both arms");
                let path = out.join(format!("{}.csv", arm.as_str()));
                fs::create_dir_all(&out).at(Stage::Report)?;
                ds.write(&path).at(Stage::Report)?;
            }
            write(&out.join("design.json"), &design.to_json()).at(Stage::Report)?;
            println!("{} shots sampled", data.total_shots);
        }
        Command::Fit { dataset, design } => {
            let design = load_design(design.as_deref(), &cfg).at(Stage::Design)?;
            let ds = Dataset::read(dataset).at(Stage::Fit)?;
            let obs = Observations::from_dataset(&ds, &design, &target_gates()).at(Stage::Fit)?;
            let fit = fit_hypotheses(&obs, &design, &FitOptions { mle: cfg.mle }).at(Stage::Fit)?;
            write(&out.join("fit.json"), &fit.report.to_json()).at(Stage::Report)?;
            write(&out.join("model_h1.json"), &fit.h1.to_json()).at(Stage::Report)?;
            write(&out.join("model_h2.json"), &fit.h2.to_json()).at(Stage::Report)?;
            println!(
                "N_sigma(H1) = {:.3}, N_sigma(H2) = {:.3}",
                fit.report.n_sigma_h1, fit.report.n_sigma_h2
            );
        }
        Command::Metrics { model, dataset, design } => {
            let report = match dataset {
                None => {
                    let text = fs::read_to_string(model)
                        .with_context(|| format!("reading {}", model.display()))
                        .at(Stage::Metrics)?;
                    let m = GateSetModel::from_json(&text).at(Stage::Metrics)?;
                    MetricsReport::from_model(&m).at(Stage::Metrics)?
                }
                Some(ds_path) => {
                    let design = load_design(design.as_deref(), &cfg).at(Stage::Design)?;
                    let ds = Dataset::read(ds_path).at(Stage::Fit)?;
                    let arm = if ds.metadata.randomized { Arm::Randomized } else { Arm::Plain };
                    let resamples = cfg.bootstrap_resamples.max(pfr_core::metrics::MIN_RESAMPLES);
                    let r = analyze_arm(arm, ds, &design, &cfg.mle, resamples, cfg.master_seed)
                        .map_err(|e| Failure { stage: e.stage, error: anyhow::anyhow!(e.message) })?;
                    r.metrics
                }
            };
            write(&out.join("metrics.json"), &report.to_json()).at(Stage::Report)?;
            write(&out.join("metrics.csv"), &report.to_csv()).at(Stage::Report)?;
            print!("{}", report.to_csv());
        }
        Command::Run => {
            let mut artifacts = match run_experiment(&cfg) {
                Ok(a) => a,
                Err(e) => {
                    if let Err(w) = write_failure_manifest(&cfg, &e, &out) {
                        log::error!("could not write failure manifest: {w}");
                    }
                    return Err(Failure { stage: e.stage, error: anyhow::anyhow!(e.message) });
                }
            };
            let files = emit_reports(&mut artifacts, &out).at(Stage::Report)?;
            for rep in &artifacts.repetitions {
                for a in &rep.arms {
                    println!(
                        "rep {} {:>10}: N_sigma(H1) = {:>9.3}  N_sigma(H2) = {:>9.3}",
                        rep.index,
                        a.arm.as_str(),
                        a.fit.n_sigma_h1,
                        a.fit.n_sigma_h2
                    );
                }
            }
            println!("{} files written to {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {} stage failed: {:#}", f.stage, f.error);
            ExitCode::FAILURE
        }
    }
}
