use super::model::GateSetModel;
use crate::pauli_algebra::{eigenvalues_from_probs, pauli_probs_from_eigenvalues, CliffordIndex, Ptm};

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Pauli eigenvalues `λ_i = R_{i,π(i)} · sign(C_{i,π(i)})` read off the
/// target's monomial pattern.
pub fn monomial_eigenvalues(r: &Ptm, target: CliffordIndex) -> [f64; 4] {
    let pattern = target.int_ptm().monomial_pattern();
    let mut lambda = [0.0; 4];
    for i in 0..4 {
        let (j, s) = pattern[i];
        lambda[i] = r.0[(i, j)] * s as f64;
    }
    lambda
}

/// Nearest (in eigenvalue space) Pauli channel composed with the target.
pub fn project_gate(r: &Ptm, target: CliffordIndex) -> Ptm {
    let mut lambda = monomial_eigenvalues(r, target);
    lambda[0] = 1.0;
    let p = project_simplex(&pauli_probs_from_eigenvalues(lambda));
    let lambda = eigenvalues_from_probs([p[0], p[1], p[2], p[3]]);
    Ptm::diagonal(lambda) * target.ptm()
}

/// Projects every gate onto the Clifford × Pauli-channel form; SPAM is kept.
pub fn project_h2(model: &GateSetModel) -> GateSetModel {
    let mut out = model.clone();
    for (c, r) in out.gates.iter_mut() {
        *r = project_gate(r, *c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gst_design::target_gates;
    use crate::pauli_algebra::{PauliProbVector, CP_TOLERANCE};
    use nalgebra::{Matrix4, Vector4};

    fn grid_oracle(lambda: [f64; 4], step: f64) -> [f64; 4] {
        // Brute force over the 3-simplex in probability space.
        let m = (1.0 / step).round() as usize;
        let mut best = (f64::INFINITY, [0.0; 4]);
        for a in 0..=m {
            for b in 0..=(m - a) {
                for c in 0..=(m - a - b) {
                    let d = m - a - b - c;
                    let p = [a, b, c, d].map(|x| x as f64 * step);
                    let l = eigenvalues_from_probs(p);
                    let dist: f64 = (0..4).map(|i| (l[i] - lambda[i]).powi(2)).sum();
                    if dist < best.0 {
                        best = (dist, l);
                    }
                }
            }
        }
        best.1
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(project_simplex(&[0.25; 4]), vec![0.25; 4]);
        assert_eq!(project_simplex(&[2.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
        let p = project_simplex(&[0.6, 0.6, -0.2]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15 && p[2] == 0.0);
    }

    #[test]
    fn idempotent_on_h2_points() {
        let e = PauliProbVector::new([0.97, 0.01, 0.015, 0.005]).unwrap().ptm();
        for c in target_gates() {
            let r = e * c.ptm();
            assert!(project_gate(&r, c).max_abs_diff(&r) < 1e-12);
        }
    }

    #[test]
    fn feasible_diagonal_drops_off_diagonals() {
        let mut m = Matrix4::from_diagonal(&Vector4::new(1.0, 0.98, 0.97, 0.99));
        for i in 1..4 {
            for j in 0..4 {
                if i != j {
                    m[(i, j)] = 0.01;
                }
            }
        }
        let p = project_gate(&Ptm(m), CliffordIndex::identity());
        assert!(p.max_abs_diff(&Ptm::diagonal([1.0, 0.98, 0.97, 0.99])) < 1e-15);
    }

    #[test]
    fn infeasible_diagonal_matches_grid_search() {
        let r = Ptm::diagonal([1.0, 1.05, 1.0, 1.0]);
        let p = project_gate(&r, CliffordIndex::identity());
        let oracle = grid_oracle([1.0, 1.05, 1.0, 1.0], 1e-3);
        for i in 0..4 {
            assert!((p.0[(i, i)] - oracle[i]).abs() < 5e-3);
        }
        assert!(p.is_completely_positive(CP_TOLERANCE));
        // Weights (1.0125, 0.0125, -0.0125, -0.0125) project to a pure identity.
        assert!(p.max_abs_diff(&Ptm::identity()) < 1e-15);
    }
}
