use nalgebra::{DMatrix, DVector, Matrix4};

use super::model::{GateSetModel, GATE_PARAMS};
use super::EstimationError;
use crate::optim::{levenberg_marquardt, numerical_rank, LmOptions};

/// Gauge matrices with first row `(1, 0, 0, 0)` keep gates trace preserving
/// and `ρ₀` fixed; 12 free entries.
pub const TP_GAUGE_DIM: usize = 12;

/// Relative singular-value threshold for numerical ranks.
pub const RANK_TOLERANCE: f64 = 1e-8;

pub const MIN_GAUGE_DET: f64 = 1e-6;

fn unit(i: usize, j: usize) -> Matrix4<f64> {
    let mut e = Matrix4::zeros();
    e[(i, j)] = 1.0;
    e
}

fn generator(a: usize) -> Matrix4<f64> {
    unit(1 + a / 4, a % 4)
}

fn gauge_from_params(x: &DVector<f64>) -> Matrix4<f64> {
    let mut g = Matrix4::identity();
    for a in 0..TP_GAUGE_DIM {
        g += generator(a) * x[a];
    }
    g
}

#[derive(Debug, Clone)]
pub struct GaugeFit {
    pub model: GateSetModel,
    pub gauge: Matrix4<f64>,
    /// `Σ_gates ‖G R G⁻¹ − T‖²_F + ‖Gρ − ρ_t‖² + ‖G⁻ᵀe − e_t‖²` at the
    /// optimum.
    pub objective: f64,
}

/// Minimizes the Frobenius distance of gates and SPAM vectors to the target
/// over trace-preserving gauges, starting from the identity. The SPAM terms
/// pin the directions commuting with every gate.
pub fn gauge_optimize(model: &GateSetModel, target: &GateSetModel) -> Result<GaugeFit, EstimationError> {
    optimize(model, target, false)
}

/// As [`gauge_optimize`], but only through gauges under which a physical
/// `model` stays physical; a non-physical `model` is returned unchanged.
pub fn gauge_optimize_physical(model: &GateSetModel, target: &GateSetModel) -> Result<GaugeFit, EstimationError> {
    if !model.is_physical() {
        return Ok(GaugeFit {
            model: model.clone(),
            gauge: Matrix4::identity(),
            objective: f64::NAN,
        });
    }
    optimize(model, target, true)
}

fn optimize(model: &GateSetModel, target: &GateSetModel, physical: bool) -> Result<GaugeFit, EstimationError> {
    if model.labels() != target.labels() {
        return Err(EstimationError::LabelMismatch);
    }
    let rs: Vec<Matrix4<f64>> = model.gates.iter().map(|(_, r)| r.0).collect();
    let ts: Vec<Matrix4<f64>> = target.gates.iter().map(|(_, r)| r.0).collect();
    let eval = |x: &DVector<f64>| {
        let g = gauge_from_params(x);
        if g.determinant().abs() < MIN_GAUGE_DET {
            return None;
        }
        let inv = g.try_inverse()?;
        if physical && !model.gauge_transform(&g).is_ok_and(|m| m.is_physical()) {
            return None;
        }
        let spam = 16 * rs.len();
        let mut r = DVector::zeros(spam + 8);
        let mut jac = DMatrix::zeros(spam + 8, TP_GAUGE_DIM);
        for (k, (rg, tg)) in rs.iter().zip(&ts).enumerate() {
            let conj = g * rg * inv;
            let diff = conj - tg;
            for e in 0..16 {
                r[16 * k + e] = diff[(e / 4, e % 4)];
            }
            for a in 0..TP_GAUGE_DIM {
                let ea = generator(a);
                let d = ea * rg * inv - conj * ea * inv;
                for e in 0..16 {
                    jac[(16 * k + e, a)] = d[(e / 4, e % 4)];
                }
            }
        }
        let rho = g * model.rho;
        let eff = inv.transpose() * model.effect;
        for i in 0..4 {
            r[spam + i] = rho[i] - target.rho[i];
            r[spam + 4 + i] = eff[i] - target.effect[i];
        }
        for a in 0..TP_GAUGE_DIM {
            let ea = generator(a);
            let drho = ea * model.rho;
            let deff = -(inv.transpose() * ea.transpose() * eff);
            for i in 0..4 {
                jac[(spam + i, a)] = drho[i];
                jac[(spam + 4 + i, a)] = deff[i];
            }
        }
        Some((r, jac))
    };
    let res = levenberg_marquardt(eval, DVector::zeros(TP_GAUGE_DIM), &LmOptions::default())
        .ok_or(EstimationError::SingularGauge(0.0))?;
    let gauge = gauge_from_params(&res.x);
    let det = gauge.determinant();
    if det.abs() < MIN_GAUGE_DET {
        return Err(EstimationError::SingularGauge(det));
    }
    Ok(GaugeFit {
        model: model.gauge_transform(&gauge)?,
        gauge,
        objective: 2.0 * res.cost,
    })
}

/// Derivative of the parameter vector along each trace-preserving gauge
/// generator, one column per generator.
pub fn gauge_jacobian(model: &GateSetModel) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(model.param_count, TP_GAUGE_DIM);
    let spam = GATE_PARAMS * model.gates.len();
    for a in 0..TP_GAUGE_DIM {
        let e = generator(a);
        for (g, (_, r)) in model.gates.iter().enumerate() {
            let d = e * r.0 - r.0 * e;
            for i in 1..4 {
                for j in 0..4 {
                    jac[(GATE_PARAMS * g + 4 * (i - 1) + j, a)] = d[(i, j)];
                }
            }
        }
        let drho = e * model.rho;
        let deff = -(e.transpose() * model.effect);
        for i in 1..4 {
            jac[(spam + i - 1, a)] = drho[i];
        }
        for i in 0..4 {
            jac[(spam + 3 + i, a)] = deff[i];
        }
    }
    jac
}

/// Tangent space of the Clifford × Pauli-channel model at `model`: one
/// direction per non-trivial monomial entry of each gate, plus SPAM.
pub fn h2_tangent(model: &GateSetModel) -> DMatrix<f64> {
    let gates = model.gates.len();
    let spam = GATE_PARAMS * gates;
    let mut t = DMatrix::zeros(model.param_count, 3 * gates + 7);
    for (g, (c, _)) in model.gates.iter().enumerate() {
        let pattern = c.int_ptm().monomial_pattern();
        for i in 1..4 {
            let (j, s) = pattern[i];
            t[(GATE_PARAMS * g + 4 * (i - 1) + j, 3 * g + i - 1)] = s as f64;
        }
    }
    for a in 0..7 {
        t[(spam + a, 3 * gates + a)] = 1.0;
    }
    t
}

/// Free H1 parameters minus the numerical gauge rank at `model`.
pub fn h1_dof(model: &GateSetModel) -> usize {
    model.param_count - numerical_rank(&gauge_jacobian(model), RANK_TOLERANCE)
}

/// Gauge directions tangent to the H2 manifold, i.e.
/// `dim(span J ∩ span T)`.
pub fn h2_residual_gauge_rank(model: &GateSetModel) -> usize {
    let j = gauge_jacobian(model);
    let t = h2_tangent(model);
    let mut both = DMatrix::zeros(j.nrows(), j.ncols() + t.ncols());
    both.columns_mut(0, j.ncols()).copy_from(&j);
    both.columns_mut(j.ncols(), t.ncols()).copy_from(&t);
    numerical_rank(&j, RANK_TOLERANCE) + numerical_rank(&t, RANK_TOLERANCE)
        - numerical_rank(&both, RANK_TOLERANCE)
}

pub fn h2_dof(model: &GateSetModel) -> usize {
    3 * model.gates.len() + 7 - h2_residual_gauge_rank(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gst_design::target_gates;
    use crate::noise::{NoiseConfig, SpamConfig};
    use crate::pauli_algebra::{CliffordIndex, PauliProbVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_gauge(rng: &mut ChaCha8Rng, scale: f64) -> Matrix4<f64> {
        let mut g = Matrix4::identity();
        for i in 1..4 {
            for j in 0..4 {
                g[(i, j)] += scale * (rng.random::<f64>() - 0.5);
            }
        }
        g
    }

    #[test]
    fn physical_gauge_keeps_complete_positivity() {
        let t = GateSetModel::target(&target_gates());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = NoiseConfig {
            depolarizing_rate: 0.05,
            overrotation_eps: 0.05,
            ..NoiseConfig::ideal()
        };
        let truth = GateSetModel::from_noise(&target_gates(), &noise, &SpamConfig::with_errors(0.05, 0.05));
        let g = random_gauge(&mut rng, 0.01);
        let moved = truth.gauge_transform(&g).unwrap();
        assert!(moved.is_physical());
        let free = gauge_optimize(&moved, &t).unwrap();
        let kept = gauge_optimize_physical(&moved, &t).unwrap();
        assert!(kept.model.is_physical());
        assert!(kept.objective >= free.objective - 1e-12);
        let start: f64 = moved.max_abs_diff(&t);
        assert!(kept.model.max_abs_diff(&t) <= start);
    }

    #[test]
    fn target_is_a_fixed_point() {
        let t = GateSetModel::target(&target_gates());
        let fit = gauge_optimize(&t, &t).unwrap();
        assert_eq!(fit.objective, 0.0);
        assert_eq!(fit.gauge, Matrix4::identity());
    }

    #[test]
    fn planted_gauge_is_recovered() {
        let t = GateSetModel::target(&target_gates());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_gauge(&mut rng, 0.1);
        let moved = t.gauge_transform(&g).unwrap();
        let fit = gauge_optimize(&moved, &t).unwrap();
        assert!(fit.objective <= 1e-10, "{}", fit.objective);
    }

    #[test]
    fn gauge_leaves_probabilities_invariant() {
        let m = GateSetModel::from_noise(
            &target_gates(),
            &NoiseConfig::coherent_with_drift(),
            &SpamConfig::with_errors(0.01, 0.02),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_gauge(&mut rng, 0.2);
        let moved = m.gauge_transform(&g).unwrap();
        let labels = target_gates();
        for _ in 0..100 {
            let len = rng.random_range(0..40);
            let seq: Vec<CliffordIndex> = (0..len).map(|_| labels[rng.random_range(0..3)]).collect();
            let a = m.probability(&seq).unwrap();
            let b = moved.probability(&seq).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = GateSetModel::from_noise(
            &target_gates(),
            &NoiseConfig::coherent_with_drift(),
            &SpamConfig::with_errors(0.01, 0.02),
        );
        let jac = gauge_jacobian(&m);
        for a in 0..TP_GAUGE_DIM {
            let h = 1e-6;
            let plus = m.gauge_transform(&(Matrix4::identity() + generator(a) * h)).unwrap().to_params();
            let minus = m.gauge_transform(&(Matrix4::identity() - generator(a) * h)).unwrap().to_params();
            let fd = (plus - minus) / (2.0 * h);
            assert!((fd - jac.column(a)).amax() < 1e-8);
        }
    }

    #[test]
    fn dof_counts() {
        // Generic H1 point: the full 12-dimensional gauge acts faithfully.
        let m = GateSetModel::from_noise(
            &target_gates(),
            &NoiseConfig::coherent_with_drift(),
            &SpamConfig::with_errors(0.01, 0.02),
        );
        assert_eq!(h1_dof(&m), 31);
        // Clifford × Pauli point: diagonal gauges diag(1, a, b, c) preserve
        // the H2 form, leaving 16 − 3.
        let lam = |p: [f64; 4]| PauliProbVector::new(p).unwrap().ptm();
        let gates = vec![
            (CliffordIndex::identity(), lam([0.99, 0.004, 0.003, 0.003])),
            (CliffordIndex::x_half(), lam([0.985, 0.006, 0.005, 0.004]) * CliffordIndex::x_half().ptm()),
            (CliffordIndex::y_half(), lam([0.988, 0.002, 0.006, 0.004]) * CliffordIndex::y_half().ptm()),
        ];
        let s = SpamConfig::with_errors(0.01, 0.02);
        let h2 = GateSetModel::new(gates, s.effective_rho(), s.effective_effect());
        assert_eq!(h2_residual_gauge_rank(&h2), 3);
        assert_eq!(h2_dof(&h2), 13);
    }
}
