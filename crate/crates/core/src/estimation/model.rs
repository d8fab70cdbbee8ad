use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use super::EstimationError;
use crate::noise::{gate_channel, NoiseConfig, SpamConfig};
use crate::pauli_algebra::{CliffordIndex, Ptm, C64, CP_TOLERANCE};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Free parameters per trace-preserving gate (rows 1–3).
pub const GATE_PARAMS: usize = 12;
/// State (3 Bloch components) plus effect (4 components).
pub const SPAM_PARAMS: usize = 7;

/// A single-qubit gate set: transfer matrices keyed by their target
/// Clifford, a prepared state and a two-outcome effect, all in the
/// normalized Pauli basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSetModel {
    /// Sorted by target label.
    pub gates: Vec<(CliffordIndex, Ptm)>,
    pub rho: Vector4<f64>,
    pub effect: Vector4<f64>,
    pub param_count: usize,
    pub gauge_dim: usize,
}

impl GateSetModel {
    pub fn new(
        mut gates: Vec<(CliffordIndex, Ptm)>,
        rho: Vector4<f64>,
        effect: Vector4<f64>,
    ) -> GateSetModel {
        gates.sort_by_key(|(c, _)| c.label());
        let param_count = GATE_PARAMS * gates.len() + SPAM_PARAMS;
        GateSetModel {
            gates,
            rho,
            effect,
            param_count,
            gauge_dim: 0,
        }
    }

    /// Ideal gates with `|0⟩` preparation and `|1⟩⟨1|` measurement.
    pub fn target(labels: &[CliffordIndex]) -> GateSetModel {
        let spam = SpamConfig::default();
        GateSetModel::new(
            labels.iter().map(|&c| (c, c.ptm())).collect(),
            Vector4::from(spam.rho),
            Vector4::from(spam.effect),
        )
    }

    /// Static (zero-drift) gate-level truth of a simulated device.
    pub fn from_noise(labels: &[CliffordIndex], noise: &NoiseConfig, spam: &SpamConfig) -> GateSetModel {
        GateSetModel::new(
            labels.iter().map(|&c| (c, gate_channel(c, noise, 0.0))).collect(),
            spam.effective_rho(),
            spam.effective_effect(),
        )
    }

    pub fn labels(&self) -> Vec<CliffordIndex> {
        self.gates.iter().map(|(c, _)| *c).collect()
    }

    pub fn gate_index(&self, c: CliffordIndex) -> Option<usize> {
        self.gates.iter().position(|(g, _)| *g == c)
    }

    pub fn gate(&self, c: CliffordIndex) -> Option<&Ptm> {
        self.gates.iter().find(|(g, _)| *g == c).map(|(_, r)| r)
    }

    pub fn gate_mut(&mut self, c: CliffordIndex) -> Option<&mut Ptm> {
        self.gates.iter_mut().find(|(g, _)| *g == c).map(|(_, r)| r)
    }

    /// `⟨E| R_L ⋯ R_1 |ρ⟩`, unclamped.
    pub fn probability(&self, seq: &[CliffordIndex]) -> Result<f64, EstimationError> {
        let mut v = self.rho;
        for &g in seq {
            let r = self
                .gate(g)
                .ok_or_else(|| EstimationError::UnknownGate(g.label()))?;
            v = r.0 * v;
        }
        Ok(self.effect.dot(&v))
    }

    /// Probability for a sequence of positions into `gates`.
    pub(crate) fn probability_indexed(&self, seq: &[u8]) -> f64 {
        let mut v = self.rho;
        for &g in seq {
            v = self.gates[g as usize].1 .0 * v;
        }
        self.effect.dot(&v)
    }

    /// Trace-preserving parameter vector: rows 1–3 of each gate, Bloch part
    /// of the state, then the effect.
    pub fn to_params(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.param_count);
        for (g, (_, r)) in self.gates.iter().enumerate() {
            for i in 1..4 {
                for j in 0..4 {
                    x[GATE_PARAMS * g + 4 * (i - 1) + j] = r.0[(i, j)];
                }
            }
        }
        let base = GATE_PARAMS * self.gates.len();
        for i in 1..4 {
            x[base + i - 1] = self.rho[i];
        }
        for i in 0..4 {
            x[base + 3 + i] = self.effect[i];
        }
        x
    }

    /// Inverse of [`GateSetModel::to_params`]; the first gate row and `ρ₀`
    /// are fixed by trace preservation.
    pub fn with_params(&self, x: &DVector<f64>) -> GateSetModel {
        let mut out = self.clone();
        for (g, (_, r)) in out.gates.iter_mut().enumerate() {
            let mut m = Matrix4::zeros();
            m[(0, 0)] = 1.0;
            for i in 1..4 {
                for j in 0..4 {
                    m[(i, j)] = x[GATE_PARAMS * g + 4 * (i - 1) + j];
                }
            }
            *r = Ptm(m);
        }
        let base = GATE_PARAMS * self.gates.len();
        out.rho = Vector4::new(FRAC_1_SQRT_2, x[base], x[base + 1], x[base + 2]);
        out.effect = Vector4::new(x[base + 3], x[base + 4], x[base + 5], x[base + 6]);
        out
    }

    /// `R → G R G⁻¹`, `ρ → G ρ`, `E → G⁻ᵀ E`.
    pub fn gauge_transform(&self, g: &Matrix4<f64>) -> Result<GateSetModel, EstimationError> {
        let inv = g.try_inverse().ok_or(EstimationError::SingularGauge(0.0))?;
        let mut out = self.clone();
        for (_, r) in out.gates.iter_mut() {
            *r = Ptm(g * r.0 * inv);
        }
        out.rho = g * self.rho;
        out.effect = inv.transpose() * self.effect;
        Ok(out)
    }

    /// Nearest CPTP gates (Frobenius), nearest valid state and effect.
    pub fn project_cptp(&self) -> GateSetModel {
        let mut out = self.clone();
        for (_, r) in out.gates.iter_mut() {
            *r = project_cptp(r);
        }
        out.rho = project_state(&self.rho);
        out.effect = project_effect(&self.effect);
        out
    }

    /// Largest entry-wise difference of gates and SPAM vectors.
    /// CPTP gates, a valid state and an effect between 0 and I.
    pub fn is_physical(&self) -> bool {
        self.gates.iter().all(|(_, r)| r.is_completely_positive(CP_TOLERANCE))
            && self.rho.fixed_rows::<3>(1).norm() <= FRAC_1_SQRT_2 + 1e-12
            && {
                let b = self.effect.fixed_rows::<3>(1).norm() * FRAC_1_SQRT_2;
                let a = self.effect[0] * FRAC_1_SQRT_2;
                a - b >= -1e-12 && a + b <= 1.0 + 1e-12
            }
    }

    pub fn max_abs_diff(&self, other: &GateSetModel) -> f64 {
        let gates = self
            .gates
            .iter()
            .zip(&other.gates)
            .map(|((_, a), (_, b))| a.max_abs_diff(b))
            .fold(0.0, f64::max);
        gates
            .max((self.rho - other.rho).amax())
            .max((self.effect - other.effect).amax())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelWire::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<GateSetModel, EstimationError> {
        let wire: ModelWire = serde_json::from_str(text)?;
        wire.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct ModelWire {
    gates: BTreeMap<String, [[f64; 4]; 4]>,
    rho: [f64; 4],
    effect: [f64; 4],
    param_count: usize,
    gauge_dim: usize,
}

impl From<&GateSetModel> for ModelWire {
    fn from(m: &GateSetModel) -> Self {
        ModelWire {
            gates: m.gates.iter().map(|(c, r)| (c.label(), r.rows())).collect(),
            rho: m.rho.into(),
            effect: m.effect.into(),
            param_count: m.param_count,
            gauge_dim: m.gauge_dim,
        }
    }
}

impl TryFrom<ModelWire> for GateSetModel {
    type Error = EstimationError;

    fn try_from(w: ModelWire) -> Result<Self, Self::Error> {
        let gates = w
            .gates
            .into_iter()
            .map(|(label, rows)| {
                CliffordIndex::from_label(&label)
                    .map(|c| (c, Ptm::from_rows(rows)))
                    .map_err(|_| EstimationError::UnknownGate(label))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut m = GateSetModel::new(gates, Vector4::from(w.rho), Vector4::from(w.effect));
        m.param_count = w.param_count;
        m.gauge_dim = w.gauge_dim;
        Ok(m)
    }
}

fn project_psd(j: &Matrix4<C64>) -> Matrix4<C64> {
    let h = (j + j.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(h);
    let mut d = Matrix4::<C64>::zeros();
    for i in 0..4 {
        d[(i, i)] = C64::from(eig.eigenvalues[i].max(0.0));
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

fn project_tp(r: &Matrix4<f64>) -> Matrix4<f64> {
    let mut m = *r;
    m[(0, 0)] = 1.0;
    for j in 1..4 {
        m[(0, j)] = 0.0;
    }
    m
}

/// Nearest CPTP map in Frobenius norm (which equals the Choi Frobenius norm
/// in this basis), by Dykstra's alternating projections onto the Choi PSD
/// cone and the trace-preserving plane.
pub fn project_cptp(r: &Ptm) -> Ptm {
    let start = Ptm(project_tp(&r.0));
    if start.choi_eigenvalues()[0] >= 0.0 && start.0 == r.0 {
        return start;
    }
    let mut x = r.0;
    let mut p = Matrix4::<f64>::zeros();
    let mut q = Matrix4::<f64>::zeros();
    for _ in 0..20_000 {
        let y = project_tp(&(x + p));
        p = x + p - y;
        let next = Ptm::from_choi(&project_psd(&Ptm(y + q).choi())).0;
        q = y + q - next;
        let delta = (next - x).amax();
        x = next;
        if delta < 1e-14 {
            break;
        }
    }
    let y = Ptm(project_tp(&x));
    let mu = y.choi_eigenvalues()[0];
    if mu >= -1e-13 {
        return y;
    }
    // Residual negativity: mix toward the fully depolarizing map, whose Choi
    // matrix is I/2.
    let eta = -mu / (0.5 - mu);
    Ptm(y.0 * (1.0 - eta) + Matrix4::from_diagonal(&Vector4::new(eta, 0.0, 0.0, 0.0)))
}

/// `ρ₀ = 1/√2` and Bloch length at most `1/√2`.
pub fn project_state(rho: &Vector4<f64>) -> Vector4<f64> {
    let bloch = rho.fixed_rows::<3>(1).norm();
    let s = if bloch > FRAC_1_SQRT_2 { FRAC_1_SQRT_2 / bloch } else { 1.0 };
    Vector4::new(FRAC_1_SQRT_2, s * rho[1], s * rho[2], s * rho[3])
}

/// Clamps the effect's eigenvalues `(e₀ ± |e|)/√2` into `[0, 1]`.
pub fn project_effect(e: &Vector4<f64>) -> Vector4<f64> {
    let v = e.fixed_rows::<3>(1).into_owned();
    let b = v.norm() * FRAC_1_SQRT_2;
    let a = e[0] * FRAC_1_SQRT_2;
    let hi = (a + b).clamp(0.0, 1.0);
    let lo = (a - b).clamp(0.0, 1.0);
    if hi == a + b && lo == a - b {
        return *e;
    }
    let a2 = 0.5 * (hi + lo);
    let b2 = 0.5 * (hi - lo);
    let dir = if b > 0.0 { v / v.norm() } else { nalgebra::Vector3::zeros() };
    let bloch = dir * (b2 / FRAC_1_SQRT_2);
    Vector4::new(a2 / FRAC_1_SQRT_2, bloch[0], bloch[1], bloch[2])
}
