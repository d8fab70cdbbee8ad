use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pfr_core::estimation::{fit_hypotheses, gauge_optimize_physical, FitOptions, GateSetModel, Observations};
use pfr_core::gst_design::{standard_design, target_gates};
use pfr_core::metrics::{avg_gate_infidelity, diamond_distance};
use pfr_core::noise::{sample_counts, Arm, SpamConfig};
use pfr_core::pauli_algebra::{
    pauli_twirl, random_channel, rotation_unitary, CliffordIndex, PauliLabel, PauliProbVector, Ptm, NUM_CLIFFORDS,
};
use pfr_core::pfr::{randomize, randomize_with_frames, verify_equivalence, CliffordCircuit};

use pfr_harness::config::{ExperimentConfig, Profile};
use pfr_harness::experiment::{run_experiment, RunArtifacts};
use pfr_harness::report::emit_reports;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn frame_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut bad = 0;
    let mut total = 0;
    for i in 0..1000u64 {
        let len = rng.random_range(1..=64);
        let gates = (0..len)
            .map(|_| CliffordIndex::new(rng.random_range(0..NUM_CLIFFORDS)).unwrap())
            .collect();
        let c = CliffordCircuit::new(gates);
        for r in 0..8 {
            let rc = randomize(&c, 1000 * i + r).unwrap();
            total += 1;
            if !verify_equivalence(&c, &rc) {
                bad += 1;
            }
        }
    }
    let t = start.elapsed();
    outcome(
        bad == 0 && within(t, 5.0),
        format!("{bad}/{total} randomizations differ, {:.2} s", t.as_secs_f64()),
    )
}

fn twirl_theorem() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut diag_err: f64 = 0.0;
    let mut enum_err: f64 = 0.0;
    for _ in 0..100 {
        let e = random_channel(&mut rng);
        let d = e.diag();
        diag_err = diag_err.max(pauli_twirl(&e).max_abs_diff(&Ptm::diagonal(d)));

        // Noisy depth-1 circuit: frame-dressed gate, noise, then the
        // correcting Pauli, averaged over the four frame draws.
        let c = CliffordIndex::new(rng.random_range(0..NUM_CLIFFORDS)).unwrap();
        let circuit = CliffordCircuit::new(vec![c]);
        let mut avg = Ptm::diagonal([0.0; 4]).0;
        for p in PauliLabel::ALL {
            let rc = randomize_with_frames(&circuit, vec![p], 0).unwrap();
            let dressed = c.compose(rc.frame_trace[0].as_clifford()).ptm();
            avg += rc.final_frame.as_clifford().ptm().0 * e.0 * dressed.0;
        }
        let expected = pauli_twirl(&e) * c.ptm();
        enum_err = enum_err.max(Ptm(avg / 4.0).max_abs_diff(&expected));
    }
    outcome(
        diag_err <= 1e-14 && enum_err <= 1e-14,
        format!("twirl vs diagonal {diag_err:.1e}, frame enumeration {enum_err:.1e}"),
    )
}

fn infidelity_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let id = Ptm::identity();
    let mut d_inf: f64 = 0.0;
    let mut d_growth = f64::NEG_INFINITY;
    for _ in 0..100 {
        let e = random_channel(&mut rng);
        let t = pauli_twirl(&e);
        d_inf = d_inf.max((avg_gate_infidelity(&e, &id).unwrap() - avg_gate_infidelity(&t, &id).unwrap()).abs());
        d_growth = d_growth.max(diamond_distance(&t, &id).unwrap() - diamond_distance(&e, &id).unwrap());
    }
    let u = Ptm::from_unitary(&rotation_unitary([1.0, 0.0, 0.0], 0.1));
    let ratio = diamond_distance(&u, &id).unwrap() / avg_gate_infidelity(&u, &id).unwrap();
    outcome(
        d_inf <= 1e-12 && d_growth <= 1e-6 && ratio > 10.0,
        format!("max |dr| {d_inf:.1e}, max diamond growth {d_growth:.1e}, coherent ratio {ratio:.1}"),
    )
}

fn diamond_oracle() -> Outcome {
    let start = Instant::now();
    let id = Ptm::identity();
    let mut err: f64 = 0.0;
    for i in 1..=30 {
        let p = 0.01 * f64::from(i);
        let d = diamond_distance(&PauliProbVector::depolarizing(p).ptm(), &id).unwrap();
        err = err.max((d - 1.5 * p).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut pauli_err: f64 = 0.0;
    for _ in 0..30 {
        let w: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
        let s: f64 = w.iter().sum();
        let p = PauliProbVector::new(w.map(|x| x / s)).unwrap();
        let d = diamond_distance(&p.ptm(), &id).unwrap();
        pauli_err = pauli_err.max((d - 2.0 * (1.0 - p.probs()[0])).abs());
    }
    let t = start.elapsed();
    outcome(
        err <= 1e-4 && pauli_err <= 1e-4 && within(t, 30.0),
        format!("depolarizing {err:.1e}, Pauli {pauli_err:.1e}, {:.2} s", t.as_secs_f64()),
    )
}

/// Pauli noise after each ideal gate, with bit-flip SPAM errors.
fn pauli_truth() -> GateSetModel {
    let noise = [
        [0.99, 0.004, 0.003, 0.003],
        [0.985, 0.006, 0.005, 0.004],
        [0.988, 0.002, 0.006, 0.004],
    ];
    let spam = SpamConfig::with_errors(0.01, 0.02);
    GateSetModel::new(
        target_gates()
            .into_iter()
            .zip(noise)
            .map(|(c, p)| (c, PauliProbVector::new(p).unwrap().ptm() * c.ptm()))
            .collect(),
        spam.effective_rho(),
        spam.effective_effect(),
    )
}

fn sampled(truth: &GateSetModel, l_max: u32, shots: u64, seed: u64) -> Observations {
    let design = standard_design(l_max).unwrap();
    let exact = Observations::expected(truth, &design, shots as f64).unwrap();
    let probs: Vec<f64> = exact.k.iter().map(|k| k / shots as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = sample_counts(&probs, shots, &mut rng).into_iter().map(|k| k as f64).collect();
    exact.with_counts(k)
}

fn n_sigma_calibration() -> Outcome {
    let start = Instant::now();
    let truth = pauli_truth();
    let design = standard_design(16).unwrap();
    let trials = 50;
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let obs = sampled(&truth, 16, 500, t);
        let fit = fit_hypotheses(&obs, &design, &FitOptions::default()).unwrap();
        let (a, b) = (fit.report.n_sigma_h1, fit.report.n_sigma_h2);
        worst = worst.max(a.abs()).max(b.abs());
        if a.abs() <= 3.0 && b.abs() <= 3.0 {
            good += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        f64::from(good) >= 0.95 * f64::from(trials as u32) && within(t, 600.0),
        format!("{good}/{trials} trials within 3, worst |N_sigma| {worst:.2}, {:.1} s", t.as_secs_f64()),
    )
}

fn quick_run() -> (RunArtifacts, Duration) {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::profile(Profile::Quick);
    let mut artifacts = run_experiment(&cfg).unwrap();
    emit_reports(&mut artifacts, dir.path()).unwrap();
    (artifacts, start.elapsed())
}

fn model_violation(run: &RunArtifacts, elapsed: Duration) -> Outcome {
    let mut pass = within(elapsed, 600.0);
    let mut detail = Vec::new();
    for rep in &run.repetitions {
        let r = &rep.arm(Arm::Randomized).fit;
        let p = &rep.arm(Arm::Plain).fit;
        let ok = p.n_sigma_h1 >= 10.0 * r.n_sigma_h1.max(1.0)
            && p.n_sigma_h2 >= 10.0 * r.n_sigma_h2.max(1.0)
            && r.n_sigma_h2 <= 5.0;
        pass &= ok;
        detail.push(format!(
            "rep {}: randomized {:.2}/{:.2}, plain {:.1}/{:.1}",
            rep.index, r.n_sigma_h1, r.n_sigma_h2, p.n_sigma_h1, p.n_sigma_h2
        ));
    }
    detail.push(format!("{:.0} s", elapsed.as_secs_f64()));
    outcome(pass, detail.join("; "))
}

/// Off-diagonal Gi entries of one arm whose interval excludes zero.
fn excluded_off_diagonals(run: &RunArtifacts, arm: Arm) -> Vec<(usize, usize, f64)> {
    let a = run.repetitions[0].arm(arm);
    let gi = a.h1.gate(CliffordIndex::identity()).unwrap();
    let ci = a.gate_ci(CliffordIndex::identity()).expect("quick profile bootstraps");
    let mut out = Vec::new();
    for r in 0..4 {
        for c in (0..4).filter(|&c| c != r) {
            let (lo, hi) = ci[4 * r + c];
            if lo > 0.0 || hi < 0.0 {
                out.push((r, c, gi.0[(r, c)]));
            }
        }
    }
    out
}

fn gi_reconstruction(run: &RunArtifacts) -> Outcome {
    let rand = excluded_off_diagonals(run, Arm::Randomized);
    let plain = excluded_off_diagonals(run, Arm::Plain);
    let fmt = |v: &[(usize, usize, f64)]| {
        v.iter().map(|(r, c, x)| format!("({r},{c})={x:.5}")).collect::<Vec<_>>().join(" ")
    };
    outcome(
        rand.is_empty() && !plain.is_empty(),
        format!("randomized outside: [{}]; plain outside: [{}]", fmt(&rand), fmt(&plain)),
    )
}

fn design_count() -> Outcome {
    let start = Instant::now();
    let d = standard_design(1024).unwrap();
    let t = start.elapsed();
    let n = d.len();
    let longest = d.max_flat_len();
    outcome(
        (3150..=3850).contains(&n) && (500..=2000).contains(&longest) && within(t, 1.0),
        format!("{n} sequences, longest {longest} gates, {:.3} s", t.as_secs_f64()),
    )
}

fn mle_recovery() -> Outcome {
    let truth = pauli_truth();
    let design = standard_design(64).unwrap();
    let obs = sampled(&truth, 64, 10_000, 9);
    let fit = fit_hypotheses(&obs, &design, &FitOptions::default()).unwrap();
    let aligned = gauge_optimize_physical(&fit.h1, &truth).unwrap().model;
    let mut worst: f64 = 0.0;
    for (c, r) in &aligned.gates {
        worst = worst.max(diamond_distance(r, truth.gate(*c).unwrap()).unwrap());
    }
    outcome(worst <= 1e-2, format!("worst gate diamond distance to truth {worst:.2e}"))
}

#[test]
fn acceptance() {
    let (run, elapsed) = quick_run();
    let results = [
        ("1 frame-randomization equivalence", frame_equivalence()),
        ("2 twirl theorem", twirl_theorem()),
        ("3 infidelity invariance, diamond contraction", infidelity_invariance()),
        ("4 diamond-norm oracles", diamond_oracle()),
        ("5 N_sigma calibration", n_sigma_calibration()),
        ("6 plain vs randomized model violation", model_violation(&run, elapsed)),
        ("7 Gi reconstruction", gi_reconstruction(&run)),
        ("8 design size", design_count()),
        ("9 MLE recovery", mle_recovery()),
    ];
    let mut failed = Vec::new();
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
