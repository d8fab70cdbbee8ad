use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use super::likelihood::Observations;
use super::model::GateSetModel;
use super::EstimationError;
use crate::gst_design::GstDesign;
use crate::pauli_algebra::{CliffordIndex, Ptm};
use crate::pfr::CliffordCircuit;

pub const MAX_CONDITION: f64 = 1e8;

struct Frequencies<'a> {
    by_flat: HashMap<&'a [CliffordIndex], u64>,
    obs: HashMap<u64, f64>,
}

impl<'a> Frequencies<'a> {
    fn new(design: &'a GstDesign, obs: &Observations) -> Frequencies<'a> {
        Frequencies {
            by_flat: design.sequences.iter().map(|s| (s.flat.gates(), s.id)).collect(),
            obs: (0..obs.len()).map(|i| (obs.ids[i], obs.k[i] / obs.n[i])).collect(),
        }
    }

    fn get(&self, parts: &[&[CliffordIndex]]) -> Result<f64, EstimationError> {
        let flat: Vec<CliffordIndex> = parts.concat();
        self.by_flat
            .get(flat.as_slice())
            .and_then(|id| self.obs.get(id))
            .copied()
            .ok_or_else(|| EstimationError::MissingSequence(CliffordCircuit::new(flat).to_string()))
    }
}

/// Linear-inversion estimate from fiducial pairs and single-gate sequences,
/// brought close to the target by a linear gauge fit and made trace
/// preserving.
pub fn lgst_seed(obs: &Observations, design: &GstDesign) -> Result<GateSetModel, EstimationError> {
    let freq = Frequencies::new(design, obs);
    let preps = &design.prep_fiducials;
    let meas = &design.meas_fiducials;
    let gram = |mid: &[CliffordIndex]| -> Result<DMatrix<f64>, EstimationError> {
        let mut m = DMatrix::zeros(meas.len(), preps.len());
        for (j, mf) in meas.iter().enumerate() {
            for (i, pf) in preps.iter().enumerate() {
                m[(j, i)] = freq.get(&[pf.gates(), mid, mf.gates()])?;
            }
        }
        Ok(m)
    };

    let g0 = gram(&[])?;
    let svd = g0.clone().svd(true, true);
    let u_full = svd.u.as_ref().expect("requested U");
    let vt_full = svd.v_t.as_ref().expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if order.len() < 4 {
        return Err(EstimationError::InformationallyIncomplete { condition: f64::INFINITY });
    }
    let top = &order[..4];
    let s: Vec<f64> = top.iter().map(|&i| svd.singular_values[i]).collect();
    let condition = s[0] / s[3];
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(EstimationError::InformationallyIncomplete { condition });
    }
    let u = DMatrix::from_fn(meas.len(), 4, |r, c| u_full[(r, top[c])]);
    let v = DMatrix::from_fn(preps.len(), 4, |r, c| vt_full[(top[c], r)]);
    let s_inv = DMatrix::from_diagonal(&DVector::from_iterator(4, s.iter().map(|x| 1.0 / x)));

    let labels = obs.labels.clone();
    let mut gates_hat = Vec::new();
    for &g in &labels {
        let m = &s_inv * u.transpose() * gram(&[g])? * &v;
        gates_hat.push(Matrix4::from_fn(|r, c| m[(r, c)]));
    }
    let b = DVector::from_iterator(meas.len(), meas.iter().map(|mf| freq.get(&[mf.gates()])).collect::<Result<Vec<_>, _>>()?);
    let a = DVector::from_iterator(preps.len(), preps.iter().map(|pf| freq.get(&[pf.gates()])).collect::<Result<Vec<_>, _>>()?);
    let rho_hat = &s_inv * u.transpose() * b;
    let eff_hat = v.transpose() * a;
    let rho_hat = Vector4::from_fn(|i, _| rho_hat[i]);
    let eff_hat = Vector4::from_fn(|i, _| eff_hat[i]);

    let target = GateSetModel::target(&labels);
    let w = trace_functional(&gates_hat, &rho_hat);
    let m = fit_linear_gauge(&gates_hat, &rho_hat, &eff_hat, &w, &target)?;
    let m_inv = m.try_inverse().ok_or(EstimationError::SingularGauge(0.0))?;
    let gates = labels
        .iter()
        .zip(&gates_hat)
        .map(|(&c, gh)| {
            let mut r = m * gh * m_inv;
            r[(0, 0)] = 1.0;
            for j in 1..4 {
                r[(0, j)] = 0.0;
            }
            (c, Ptm(r))
        })
        .collect();
    let mut rho = m * rho_hat;
    rho[0] = std::f64::consts::FRAC_1_SQRT_2;
    let effect = m_inv.transpose() * eff_hat;
    Ok(GateSetModel::new(gates, rho, effect))
}

/// Closest common left fixed point `w` of the estimated gates, scaled so that
/// `w ρ̂ = 1/√2`. It becomes the first row of the gauge, which makes the
/// transformed gates trace preserving.
fn trace_functional(gates_hat: &[Matrix4<f64>], rho_hat: &Vector4<f64>) -> Vector4<f64> {
    let mut stacked = DMatrix::zeros(4, 4 * gates_hat.len());
    for (k, g) in gates_hat.iter().enumerate() {
        let d = g - Matrix4::identity();
        stacked.view_mut((0, 4 * k), (4, 4)).copy_from(&d);
    }
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("requested U");
    let (col, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("four singular values");
    let w = Vector4::from_fn(|i, _| u[(i, col)]);
    w * (std::f64::consts::FRAC_1_SQRT_2 / w.dot(rho_hat))
}

/// Least-squares `M` with first row `w` and `M ĝ ≈ T M`, `M ρ̂ ≈ ρ_t`,
/// `ê ≈ e_tᵀ M`.
fn fit_linear_gauge(
    gates_hat: &[Matrix4<f64>],
    rho_hat: &Vector4<f64>,
    eff_hat: &Vector4<f64>,
    w: &Vector4<f64>,
    target: &GateSetModel,
) -> Result<Matrix4<f64>, EstimationError> {
    let rows = 16 * gates_hat.len() + 8;
    let mut a = DMatrix::zeros(rows, 16);
    let mut rhs = DVector::zeros(rows);
    let idx = |r: usize, c: usize| 4 * r + c;
    let mut row = 0;
    for (gh, (_, t)) in gates_hat.iter().zip(&target.gates) {
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    a[(row, idx(i, k))] += gh[(k, j)];
                    a[(row, idx(k, j))] -= t.0[(i, k)];
                }
                row += 1;
            }
        }
    }
    for i in 0..4 {
        for k in 0..4 {
            a[(row, idx(i, k))] = rho_hat[k];
        }
        rhs[row] = target.rho[i];
        row += 1;
    }
    for j in 0..4 {
        for k in 0..4 {
            a[(row, idx(k, j))] = target.effect[k];
        }
        rhs[row] = eff_hat[j];
        row += 1;
    }
    for k in 0..4 {
        rhs -= a.column(idx(0, k)) * w[k];
    }
    let free = a.columns(4, 12).into_owned();
    let sol = free
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|_| EstimationError::SingularGauge(0.0))?;
    Ok(Matrix4::from_fn(|r, c| if r == 0 { w[c] } else { sol[idx(r, c) - 4] }))
}
