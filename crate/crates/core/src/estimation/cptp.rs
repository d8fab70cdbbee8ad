//! Coordinates in which every point is a physical gate set: each gate is
//! `exp(L)·C` with `L` a Lindblad generator, the state and effect are
//! spectral forms with eigenvalues written as sines.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix4, Vector3, Vector4};

use crate::optim::{levenberg_marquardt, LmOptions};
use crate::pauli_algebra::{PauliLabel, Ptm, C64};

use super::model::{GateSetModel, GATE_PARAMS};

/// Hamiltonian (3) and dissipator Cholesky factor (3 real diagonal, 3
/// complex lower) per gate.
pub const LINDBLAD_PARAMS: usize = 12;
/// State: polarization angle and an unnormalized Bloch direction.
const STATE_COORDS: usize = 4;
/// Effect: two eigenvalue angles and an unnormalized direction.
const EFFECT_COORDS: usize = 5;
/// Dissipator seed when starting from the target, about 1e-3 per gate.
const SEED_DISSIPATION: f64 = 0.03;
const FD_STEP: f64 = 1e-7;
const CURVATURE_STEP: f64 = 1e-4;

pub fn coord_count(gates: usize) -> usize {
    LINDBLAD_PARAMS * gates + STATE_COORDS + EFFECT_COORDS
}

fn paulis() -> [Matrix2<C64>; 4] {
    PauliLabel::ALL.map(PauliLabel::matrix)
}

/// Transfer matrix of `L(ρ) = -i[H, ρ] + Σ c_jk (P_j ρ P_k − ½{P_k P_j, ρ})`
/// with `H = ½ Σ h_j P_j` and `c = A A†`.
pub fn lindblad_generator(theta: &[f64]) -> Matrix4<f64> {
    let p = paulis();
    let h = &theta[0..3];
    let z = C64::new(0.0, 0.0);
    let a = Matrix3::new(
        C64::new(theta[3], 0.0),
        z,
        z,
        C64::new(theta[6], theta[7]),
        C64::new(theta[4], 0.0),
        z,
        C64::new(theta[8], theta[9]),
        C64::new(theta[10], theta[11]),
        C64::new(theta[5], 0.0),
    );
    let c = a * a.adjoint();
    let mut ham = Matrix2::zeros();
    for j in 0..3 {
        ham += p[j + 1] * C64::new(0.5 * h[j], 0.0);
    }
    let im = C64::new(0.0, 1.0);
    let apply = |rho: &Matrix2<C64>| -> Matrix2<C64> {
        let mut out = -(ham * rho - rho * ham) * im;
        for j in 0..3 {
            for k in 0..3 {
                let cjk = c[(j, k)];
                if cjk == z {
                    continue;
                }
                let (pj, pk) = (&p[j + 1], &p[k + 1]);
                let kj = pk * pj;
                out += (pj * rho * pk - (kj * rho + rho * kj) * C64::new(0.5, 0.0)) * cjk;
            }
        }
        out
    };
    let mut m = Matrix4::zeros();
    for b in 0..4 {
        let lb = apply(&p[b]);
        for a2 in 0..4 {
            m[(a2, b)] = 0.5 * (p[a2] * lb).trace().re;
        }
    }
    m
}

fn gate_from(theta: &[f64], target: &Ptm) -> Matrix4<f64> {
    lindblad_generator(theta).exp() * target.0
}

fn direction(u: &[f64]) -> Vector3<f64> {
    let v = Vector3::new(u[0], u[1], u[2]);
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        Vector3::z()
    }
}

fn state_from(t: &[f64]) -> Vector4<f64> {
    let r = direction(&t[1..4]) * (t[0].sin() * FRAC_1_SQRT_2);
    Vector4::new(FRAC_1_SQRT_2, r[0], r[1], r[2])
}

fn effect_from(t: &[f64]) -> Vector4<f64> {
    let (l1, l2) = (t[0].sin().powi(2), t[1].sin().powi(2));
    let a = 0.5 * (l1 + l2);
    let b = 0.5 * (l1 - l2);
    let r = direction(&t[2..5]) * (b / FRAC_1_SQRT_2);
    Vector4::new(a / FRAC_1_SQRT_2, r[0], r[1], r[2])
}

/// Map from coordinates to gate sets sharing `template`'s labels and counts.
pub struct CptpChart {
    targets: Vec<Ptm>,
    template: GateSetModel,
}

impl CptpChart {
    pub fn new(template: &GateSetModel) -> CptpChart {
        CptpChart {
            targets: template.gates.iter().map(|(c, _)| c.ptm()).collect(),
            template: template.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        coord_count(self.targets.len())
    }

    pub fn model(&self, theta: &DVector<f64>) -> GateSetModel {
        let mut m = self.template.clone();
        let t = theta.as_slice();
        for (g, (_, r)) in m.gates.iter_mut().enumerate() {
            *r = Ptm(gate_from(&t[LINDBLAD_PARAMS * g..LINDBLAD_PARAMS * (g + 1)], &self.targets[g]));
        }
        let base = LINDBLAD_PARAMS * self.targets.len();
        m.rho = state_from(&t[base..base + STATE_COORDS]);
        m.effect = effect_from(&t[base + STATE_COORDS..]);
        m
    }

    /// Derivative of the trace-preserving parameters with respect to the
    /// coordinates, by central differences. Gates are block diagonal.
    pub fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let tp_dim = self.template.param_count;
        let mut jac = DMatrix::zeros(tp_dim, self.dim());
        let t = theta.as_slice();
        let mut buf = t.to_vec();
        for (g, target) in self.targets.iter().enumerate() {
            let off = LINDBLAD_PARAMS * g;
            for q in 0..LINDBLAD_PARAMS {
                let x0 = buf[off + q];
                buf[off + q] = x0 + FD_STEP;
                let hi = gate_from(&buf[off..off + LINDBLAD_PARAMS], target);
                buf[off + q] = x0 - FD_STEP;
                let lo = gate_from(&buf[off..off + LINDBLAD_PARAMS], target);
                buf[off + q] = x0;
                let d = (hi - lo) / (2.0 * FD_STEP);
                for i in 1..4 {
                    for j in 0..4 {
                        jac[(GATE_PARAMS * g + 4 * (i - 1) + j, off + q)] = d[(i, j)];
                    }
                }
            }
        }
        let base = LINDBLAD_PARAMS * self.targets.len();
        let tp_base = GATE_PARAMS * self.targets.len();
        for q in 0..STATE_COORDS {
            let x0 = buf[base + q];
            buf[base + q] = x0 + FD_STEP;
            let hi = state_from(&buf[base..base + STATE_COORDS]);
            buf[base + q] = x0 - FD_STEP;
            let lo = state_from(&buf[base..base + STATE_COORDS]);
            buf[base + q] = x0;
            for i in 1..4 {
                jac[(tp_base + i - 1, base + q)] = (hi[i] - lo[i]) / (2.0 * FD_STEP);
            }
        }
        let eb = base + STATE_COORDS;
        for q in 0..EFFECT_COORDS {
            let x0 = buf[eb + q];
            buf[eb + q] = x0 + FD_STEP;
            let hi = effect_from(&buf[eb..eb + EFFECT_COORDS]);
            buf[eb + q] = x0 - FD_STEP;
            let lo = effect_from(&buf[eb..eb + EFFECT_COORDS]);
            buf[eb + q] = x0;
            for i in 0..4 {
                jac[(tp_base + 3 + i, eb + q)] = (hi[i] - lo[i]) / (2.0 * FD_STEP);
            }
        }
        jac
    }

    /// `Σ_i s_i ∇²x_i(θ)` for trace-preserving parameters `x(θ)` and a
    /// score `s` over them, by second differences within each block.
    pub fn curvature(&self, theta: &DVector<f64>, score: &DVector<f64>) -> DMatrix<f64> {
        let n_gates = self.targets.len();
        let tp_base = GATE_PARAMS * n_gates;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        let mut blocks: Vec<(usize, usize, Box<dyn Fn(&[f64]) -> f64 + '_>)> = Vec::new();
        for (g, target) in self.targets.iter().enumerate() {
            let sg = score.rows(GATE_PARAMS * g, GATE_PARAMS).into_owned();
            blocks.push((
                LINDBLAD_PARAMS * g,
                LINDBLAD_PARAMS,
                Box::new(move |t: &[f64]| {
                    let m = gate_from(t, target);
                    (1..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| sg[4 * (i - 1) + j] * m[(i, j)]).sum()
                }),
            ));
        }
        let base = LINDBLAD_PARAMS * n_gates;
        let sr = score.rows(tp_base, 3).into_owned();
        blocks.push((
            base,
            STATE_COORDS,
            Box::new(move |t: &[f64]| {
                let r = state_from(t);
                (0..3).map(|i| sr[i] * r[i + 1]).sum()
            }),
        ));
        let se = score.rows(tp_base + 3, 4).into_owned();
        blocks.push((
            base + STATE_COORDS,
            EFFECT_COORDS,
            Box::new(move |t: &[f64]| se.dot(&effect_from(t))),
        ));
        let h = CURVATURE_STEP;
        for (off, len, f) in &blocks {
            let mut t = theta.as_slice()[*off..off + len].to_vec();
            let f0 = f(&t);
            for a in 0..*len {
                for b in a..*len {
                    let (ta, tb) = (t[a], t[b]);
                    let mut eval = |da: f64, db: f64| {
                        t[a] += da;
                        t[b] += db;
                        let v = f(&t);
                        t[a] = ta;
                        t[b] = tb;
                        v
                    };
                    let v = if a == b {
                        (eval(h, 0.0) - 2.0 * f0 + eval(-h, 0.0)) / (h * h)
                    } else {
                        (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h)
                    };
                    out[(off + a, off + b)] = v;
                    out[(off + b, off + a)] = v;
                }
            }
        }
        out
    }

    /// Coordinates of the chart point nearest `model`, fitted gate by gate;
    /// `model` should be physical.
    pub fn coordinates(&self, model: &GateSetModel) -> DVector<f64> {
        let mut theta = DVector::zeros(self.dim());
        for (g, (_, r)) in model.gates.iter().enumerate() {
            let fit = fit_lindblad(&r.0, &self.targets[g]);
            theta.rows_mut(LINDBLAD_PARAMS * g, LINDBLAD_PARAMS).copy_from(&fit);
        }
        let base = LINDBLAD_PARAMS * self.targets.len();
        let bloch = model.rho.fixed_rows::<3>(1).into_owned();
        let s = (bloch.norm() / FRAC_1_SQRT_2).min(1.0);
        let dir = direction(bloch.as_slice());
        theta[base] = s.asin();
        theta.rows_mut(base + 1, 3).copy_from(&dir);
        let e = model.effect.fixed_rows::<3>(1).into_owned();
        let a = model.effect[0] * FRAC_1_SQRT_2;
        let b = e.norm() * FRAC_1_SQRT_2;
        let eb = base + STATE_COORDS;
        theta[eb] = (a + b).clamp(0.0, 1.0).sqrt().asin();
        theta[eb + 1] = (a - b).clamp(0.0, 1.0).sqrt().asin();
        theta.rows_mut(eb + 2, 3).copy_from(&direction(e.as_slice()));
        theta
    }

    /// Coordinates of the target gate set with a small seed dissipator.
    pub fn target_coordinates(&self, model: &GateSetModel) -> DVector<f64> {
        let mut theta = self.coordinates(model);
        for g in 0..self.targets.len() {
            let off = LINDBLAD_PARAMS * g;
            theta.rows_mut(off, LINDBLAD_PARAMS).fill(0.0);
            for d in 3..6 {
                theta[off + d] = SEED_DISSIPATION;
            }
        }
        theta
    }
}

/// Least-squares Lindblad coordinates of `gate` relative to `target`.
fn fit_lindblad(gate: &Matrix4<f64>, target: &Ptm) -> DVector<f64> {
    let mut x0 = DVector::zeros(LINDBLAD_PARAMS);
    for d in 3..6 {
        x0[d] = SEED_DISSIPATION;
    }
    let residual = |x: &[f64]| -> DVector<f64> {
        let m = gate_from(x, target) - gate;
        DVector::from_iterator(12, (1..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|ij| m[ij]))
    };
    let eval = |x: &DVector<f64>| {
        let r = residual(x.as_slice());
        let mut jac = DMatrix::zeros(12, LINDBLAD_PARAMS);
        let mut buf = x.as_slice().to_vec();
        for q in 0..LINDBLAD_PARAMS {
            let x_q = buf[q];
            buf[q] = x_q + FD_STEP;
            let hi = residual(&buf);
            buf[q] = x_q - FD_STEP;
            let lo = residual(&buf);
            buf[q] = x_q;
            jac.set_column(q, &((hi - lo) / (2.0 * FD_STEP)));
        }
        Some((r, jac))
    };
    let opts = LmOptions {
        max_iterations: 300,
        ..LmOptions::default()
    };
    levenberg_marquardt(eval, x0.clone(), &opts).map(|r| r.x).unwrap_or(x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gst_design::target_gates;
    use crate::noise::{NoiseConfig, SpamConfig};
    use crate::pauli_algebra::PauliProbVector;

    #[test]
    fn generator_of_depolarizing_dissipator() {
        // c = γ I gives a decay rate 4γ on all Bloch components.
        let g = 0.01f64;
        let mut t = [0.0; 12];
        t[3] = g.sqrt();
        t[4] = g.sqrt();
        t[5] = g.sqrt();
        let l = lindblad_generator(&t);
        let want = Matrix4::from_diagonal(&Vector4::new(0.0, -4.0 * g, -4.0 * g, -4.0 * g));
        assert!((l - want).amax() < 1e-15);
    }

    #[test]
    fn generator_of_hamiltonian_rotates() {
        let mut t = [0.0; 12];
        t[2] = 0.3;
        let g = lindblad_generator(&t).exp();
        let u = crate::pauli_algebra::rotation_unitary([0.0, 0.0, 1.0], 0.3);
        assert!((g - Ptm::from_unitary(&u).0).amax() < 1e-12);
    }

    #[test]
    fn chart_points_are_physical_and_round_trip() {
        let noise = NoiseConfig {
            depolarizing_rate: 0.01,
            ..NoiseConfig::coherent_with_drift()
        };
        let truth = GateSetModel::from_noise(&target_gates(), &noise, &SpamConfig::with_errors(0.01, 0.02));
        let chart = CptpChart::new(&truth);
        let theta = chart.coordinates(&truth);
        let back = chart.model(&theta);
        assert!(back.is_physical());
        assert!(back.max_abs_diff(&truth) < 1e-8, "{}", back.max_abs_diff(&truth));
        let pure = chart.model(&chart.target_coordinates(&GateSetModel::target(&target_gates())));
        assert!(pure.is_physical());
        let p = PauliProbVector::depolarizing(0.001).ptm();
        assert!((pure.gates[0].1 .0 - p.0).amax() < 1e-2);
    }

    #[test]
    fn jacobian_matches_parameter_differences() {
        let truth = GateSetModel::from_noise(
            &target_gates(),
            &NoiseConfig::transmon_preset(),
            &SpamConfig::with_errors(0.02, 0.03),
        );
        let chart = CptpChart::new(&truth);
        let theta = chart.coordinates(&truth);
        let jac = chart.jacobian(&theta);
        let dir = DVector::from_fn(chart.dim(), |i, _| ((i * 7 % 11) as f64 - 5.0) * 1e-6);
        let moved = chart.model(&(&theta + &dir)).to_params() - chart.model(&theta).to_params();
        assert!((moved - &jac * dir).amax() < 1e-9);
    }

    #[test]
    fn curvature_matches_second_differences() {
        let truth = GateSetModel::from_noise(
            &target_gates(),
            &NoiseConfig::coherent_with_drift(),
            &SpamConfig::with_errors(0.02, 0.03),
        );
        let chart = CptpChart::new(&truth);
        let theta = chart.coordinates(&truth);
        let s = DVector::from_fn(truth.param_count, |i, _| ((i * 5 % 7) as f64) - 3.0);
        let c = chart.curvature(&theta, &s);
        let dir = DVector::from_fn(chart.dim(), |i, _| ((i * 3 % 5) as f64 - 2.0) * 1e-3);
        let f = |t: &DVector<f64>| s.dot(&chart.model(t).to_params());
        let second = (f(&(&theta + &dir)) - 2.0 * f(&theta) + f(&(&theta - &dir))) / 1.0;
        let want = (dir.transpose() * &c * &dir)[(0, 0)];
        assert!((second - want).abs() < 1e-4 * want.abs(), "{second} {want}");
    }
}
