//! Single-qubit Pauli and Clifford group algebra, and the Pauli-Liouville
//! (Pauli transfer matrix) representation of channels.
//!
//! Paulis are phase free. The 24 Cliffords are generated by closure from the
//! `X_π/2` and `Z_π/2` unitaries the first time any table is touched, and are
//! ordered by their transfer matrices (descending lexicographic order over the
//! flattened integer entries), which puts the identity at index 0.
//!
//! Transfer matrices use the orthonormal basis `B_i = P_i / √2` in the order
//! `(I, X, Y, Z)`. Choi matrices are normalized to trace 2 for trace-preserving
//! maps, so the Choi matrix of a unitary channel has spectrum `{2, 0, 0, 0}`.

use std::collections::HashMap;
use std::fmt;
use std::ops::Mul;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{Complex, Matrix2, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type C64 = Complex<f64>;

/// Choi eigenvalues at or above `-CP_TOLERANCE` count as nonnegative.
pub const CP_TOLERANCE: f64 = 1e-10;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("unknown gate label `{0}`")]
    UnknownLabel(String),
    #[error("clifford index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("unitary is not a single-qubit Clifford")]
    NotClifford,
}

/// Phase-free single-qubit Pauli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliLabel {
    I,
    X,
    Y,
    Z,
}

impl PauliLabel {
    pub const ALL: [PauliLabel; 4] = [PauliLabel::I, PauliLabel::X, PauliLabel::Y, PauliLabel::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> PauliLabel {
        PauliLabel::ALL[i & 3]
    }

    pub fn commutes_with(self, other: PauliLabel) -> bool {
        self == PauliLabel::I || other == PauliLabel::I || self == other
    }

    /// `+1` if the labels commute, `-1` otherwise.
    pub fn character(self, other: PauliLabel) -> f64 {
        if self.commutes_with(other) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn matrix(self) -> Matrix2<C64> {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            PauliLabel::I => Matrix2::new(o, z, z, o),
            PauliLabel::X => Matrix2::new(z, o, o, z),
            PauliLabel::Y => Matrix2::new(z, -i, i, z),
            PauliLabel::Z => Matrix2::new(o, z, z, -o),
        }
    }

    /// The Pauli applied as a gate.
    pub fn as_clifford(self) -> CliffordIndex {
        tables().pauli_gates[self.index()]
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLabel::I => 'I',
            PauliLabel::X => 'X',
            PauliLabel::Y => 'Y',
            PauliLabel::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<PauliLabel> {
        match c {
            'I' => Some(PauliLabel::I),
            'X' => Some(PauliLabel::X),
            'Y' => Some(PauliLabel::Y),
            'Z' => Some(PauliLabel::Z),
            _ => None,
        }
    }
}

impl Mul for PauliLabel {
    type Output = PauliLabel;

    fn mul(self, other: PauliLabel) -> PauliLabel {
        // I=00, X=01, Y=10, Z=11 in this encoding is not XOR-closed, so go
        // through the symplectic (x, z) bits instead.
        let bits = |p: PauliLabel| match p {
            PauliLabel::I => (false, false),
            PauliLabel::X => (true, false),
            PauliLabel::Y => (true, true),
            PauliLabel::Z => (false, true),
        };
        let (ax, az) = bits(self);
        let (bx, bz) = bits(other);
        match (ax ^ bx, az ^ bz) {
            (false, false) => PauliLabel::I,
            (true, false) => PauliLabel::X,
            (true, true) => PauliLabel::Y,
            (false, true) => PauliLabel::Z,
        }
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Phase-free Pauli product.
pub fn pauli_mul(a: PauliLabel, b: PauliLabel) -> PauliLabel {
    a * b
}

/// One of the 24 single-qubit Clifford group elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CliffordIndex(u8);

pub const NUM_CLIFFORDS: usize = 24;

impl CliffordIndex {
    pub fn new(idx: usize) -> Result<CliffordIndex, AlgebraError> {
        if idx < NUM_CLIFFORDS {
            Ok(CliffordIndex(idx as u8))
        } else {
            Err(AlgebraError::IndexOutOfRange(idx))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = CliffordIndex> {
        (0..NUM_CLIFFORDS as u8).map(CliffordIndex)
    }

    pub fn identity() -> CliffordIndex {
        CliffordIndex(0)
    }

    /// `X_π/2`, the `Gx` gate.
    pub fn x_half() -> CliffordIndex {
        tables().named.x_half
    }

    /// `Y_π/2`, the `Gy` gate.
    pub fn y_half() -> CliffordIndex {
        tables().named.y_half
    }

    pub fn z_half() -> CliffordIndex {
        tables().named.z_half
    }

    pub fn hadamard() -> CliffordIndex {
        tables().named.hadamard
    }

    /// `self · other` as operators: `other` acts first.
    pub fn compose(self, other: CliffordIndex) -> CliffordIndex {
        tables().compose[self.index()][other.index()]
    }

    pub fn inverse(self) -> CliffordIndex {
        tables().inverse[self.index()]
    }

    /// Phase-free label of `C P C†`.
    pub fn conjugate(self, p: PauliLabel) -> PauliLabel {
        tables().conj[self.index()][p.index()]
    }

    pub fn unitary(self) -> Matrix2<C64> {
        tables().unitaries[self.index()]
    }

    pub fn int_ptm(self) -> IntPtm {
        tables().ptms[self.index()]
    }

    pub fn ptm(self) -> Ptm {
        self.int_ptm().to_ptm()
    }

    /// Look up the Clifford implemented by a 2×2 unitary (up to phase).
    pub fn from_unitary(u: &Matrix2<C64>) -> Result<CliffordIndex, AlgebraError> {
        let key = IntPtm::from_unitary(u).ok_or(AlgebraError::NotClifford)?;
        tables()
            .by_ptm
            .get(&key.0)
            .copied()
            .ok_or(AlgebraError::NotClifford)
    }

    /// Circuit-text label: `Gi`, `Gx`, `Gy` for the standard gates, `C<n>` otherwise.
    pub fn label(self) -> String {
        let named = &tables().named;
        if self == CliffordIndex::identity() {
            "Gi".to_string()
        } else if self == named.x_half {
            "Gx".to_string()
        } else if self == named.y_half {
            "Gy".to_string()
        } else {
            format!("C{}", self.0)
        }
    }

    pub fn from_label(s: &str) -> Result<CliffordIndex, AlgebraError> {
        match s {
            "Gi" => Ok(CliffordIndex::identity()),
            "Gx" => Ok(CliffordIndex::x_half()),
            "Gy" => Ok(CliffordIndex::y_half()),
            _ => {
                let n = s
                    .strip_prefix('C')
                    .and_then(|rest| rest.parse::<usize>().ok())
                    .ok_or_else(|| AlgebraError::UnknownLabel(s.to_string()))?;
                CliffordIndex::new(n).map_err(|_| AlgebraError::UnknownLabel(s.to_string()))
            }
        }
    }
}

impl fmt::Display for CliffordIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for CliffordIndex {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CliffordIndex::from_label(s)
    }
}

impl Serialize for CliffordIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for CliffordIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CliffordIndex::from_label(&s).map_err(serde::de::Error::custom)
    }
}

/// Phase-free label of `C P C†`.
pub fn clifford_conjugate_pauli(c: CliffordIndex, p: PauliLabel) -> PauliLabel {
    c.conjugate(p)
}

pub fn ptm_of_clifford(c: CliffordIndex) -> Ptm {
    c.ptm()
}

/// Integer transfer matrix of a Clifford; entries in {-1, 0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntPtm(pub [[i32; 4]; 4]);

impl IntPtm {
    pub fn identity() -> IntPtm {
        let mut m = [[0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1;
        }
        IntPtm(m)
    }

    fn from_unitary(u: &Matrix2<C64>) -> Option<IntPtm> {
        let r = Ptm::from_unitary(u);
        let mut m = [[0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let v = r.0[(i, j)];
                let rounded = v.round();
                if (v - rounded).abs() > 1e-9 {
                    return None;
                }
                m[i][j] = rounded as i32;
            }
        }
        Some(IntPtm(m))
    }

    pub fn to_ptm(self) -> Ptm {
        Ptm(Matrix4::from_fn(|i, j| self.0[i][j] as f64))
    }

    /// Column index of the nonzero entry in each row, and its sign.
    pub fn monomial_pattern(&self) -> [(usize, i32); 4] {
        let mut out = [(0, 0); 4];
        for (i, row) in self.0.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0 {
                    out[i] = (j, v);
                }
            }
        }
        out
    }
}

impl Mul for IntPtm {
    type Output = IntPtm;

    fn mul(self, rhs: IntPtm) -> IntPtm {
        let mut m = [[0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        IntPtm(m)
    }
}

struct NamedCliffords {
    x_half: CliffordIndex,
    y_half: CliffordIndex,
    z_half: CliffordIndex,
    hadamard: CliffordIndex,
}

struct CliffordTables {
    unitaries: Vec<Matrix2<C64>>,
    ptms: Vec<IntPtm>,
    by_ptm: HashMap<[[i32; 4]; 4], CliffordIndex>,
    compose: Vec<Vec<CliffordIndex>>,
    inverse: Vec<CliffordIndex>,
    conj: Vec<[PauliLabel; 4]>,
    pauli_gates: [CliffordIndex; 4],
    named: NamedCliffords,
}

fn tables() -> &'static CliffordTables {
    static TABLES: OnceLock<CliffordTables> = OnceLock::new();
    TABLES.get_or_init(build_tables)
}

/// `exp(-i θ n·σ / 2)` for a unit axis `n`.
pub fn rotation_unitary(axis: [f64; 3], theta: f64) -> Matrix2<C64> {
    let (s, c) = (theta / 2.0).sin_cos();
    let id = PauliLabel::I.matrix();
    let gen = PauliLabel::X.matrix() * C64::from(axis[0])
        + PauliLabel::Y.matrix() * C64::from(axis[1])
        + PauliLabel::Z.matrix() * C64::from(axis[2]);
    id * C64::from(c) - gen * C64::new(0.0, s)
}

fn build_tables() -> CliffordTables {
    use std::f64::consts::FRAC_PI_2;
    let generators = [
        rotation_unitary([1.0, 0.0, 0.0], FRAC_PI_2),
        rotation_unitary([0.0, 0.0, 1.0], FRAC_PI_2),
    ];

    // Breadth-first closure, keyed by the phase-free transfer matrix.
    let mut found: HashMap<[[i32; 4]; 4], Matrix2<C64>> = HashMap::new();
    let mut frontier = vec![Matrix2::<C64>::identity()];
    found.insert(IntPtm::identity().0, Matrix2::identity());
    while let Some(u) = frontier.pop() {
        for g in &generators {
            let next = g * u;
            let key = IntPtm::from_unitary(&next).expect("generators are Clifford").0;
            if let std::collections::hash_map::Entry::Vacant(e) = found.entry(key) {
                e.insert(next);
                frontier.push(next);
            }
        }
    }
    assert_eq!(found.len(), NUM_CLIFFORDS, "Clifford closure must have 24 elements");

    let mut elems: Vec<([[i32; 4]; 4], Matrix2<C64>)> = found.into_iter().collect();
    let flat = |m: &[[i32; 4]; 4]| m.iter().flatten().copied().collect::<Vec<i32>>();
    elems.sort_by(|a, b| flat(&b.0).cmp(&flat(&a.0)));

    let ptms: Vec<IntPtm> = elems.iter().map(|(k, _)| IntPtm(*k)).collect();
    let unitaries: Vec<Matrix2<C64>> = elems.iter().map(|(_, u)| *u).collect();
    let by_ptm: HashMap<[[i32; 4]; 4], CliffordIndex> = ptms
        .iter()
        .enumerate()
        .map(|(i, p)| (p.0, CliffordIndex(i as u8)))
        .collect();
    debug_assert_eq!(ptms[0], IntPtm::identity());

    let compose: Vec<Vec<CliffordIndex>> = ptms
        .iter()
        .map(|a| ptms.iter().map(|b| by_ptm[&(*a * *b).0]).collect())
        .collect();
    let inverse: Vec<CliffordIndex> = (0..NUM_CLIFFORDS)
        .map(|a| {
            let b = (0..NUM_CLIFFORDS)
                .find(|&b| compose[a][b] == CliffordIndex(0))
                .expect("group element has an inverse");
            CliffordIndex(b as u8)
        })
        .collect();
    let conj: Vec<[PauliLabel; 4]> = ptms
        .iter()
        .map(|p| {
            let mut row = [PauliLabel::I; 4];
            for (col, slot) in row.iter_mut().enumerate() {
                let target = (0..4).find(|&r| p.0[r][col] != 0).expect("monomial");
                *slot = PauliLabel::from_index(target);
            }
            row
        })
        .collect();

    let lookup = |u: Matrix2<C64>| by_ptm[&IntPtm::from_unitary(&u).expect("clifford").0];
    let pauli_gates = PauliLabel::ALL.map(|p| lookup(p.matrix()));
    let h = (PauliLabel::X.matrix() + PauliLabel::Z.matrix()) * C64::from(FRAC_1_SQRT_2);
    let named = NamedCliffords {
        x_half: lookup(rotation_unitary([1.0, 0.0, 0.0], FRAC_PI_2)),
        y_half: lookup(rotation_unitary([0.0, 1.0, 0.0], FRAC_PI_2)),
        z_half: lookup(rotation_unitary([0.0, 0.0, 1.0], FRAC_PI_2)),
        hadamard: lookup(h),
    };

    CliffordTables {
        unitaries,
        ptms,
        by_ptm,
        compose,
        inverse,
        conj,
        pauli_gates,
        named,
    }
}

/// 4×4 real Pauli transfer matrix in the `(I, X, Y, Z)/√2` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ptm(pub Matrix4<f64>);

impl Ptm {
    pub fn identity() -> Ptm {
        Ptm(Matrix4::identity())
    }

    pub fn from_matrix(m: Matrix4<f64>) -> Ptm {
        Ptm(m)
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Ptm {
        Ptm(Matrix4::from_fn(|i, j| rows[i][j]))
    }

    pub fn diagonal(lambda: [f64; 4]) -> Ptm {
        Ptm(Matrix4::from_diagonal(&Vector4::from(lambda)))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[(i, j)];
            }
        }
        out
    }

    pub fn diag(&self) -> [f64; 4] {
        [self.0[(0, 0)], self.0[(1, 1)], self.0[(2, 2)], self.0[(3, 3)]]
    }

    /// `R_ij = ½ Tr(P_i U P_j U†)`.
    pub fn from_unitary(u: &Matrix2<C64>) -> Ptm {
        Ptm::from_kraus(std::slice::from_ref(u))
    }

    /// `R_ij = ½ Σ_k Tr(P_i K_k P_j K_k†)`.
    pub fn from_kraus(kraus: &[Matrix2<C64>]) -> Ptm {
        let paulis = PauliLabel::ALL.map(|p| p.matrix());
        let mut m = Matrix4::zeros();
        for j in 0..4 {
            let mut out = Matrix2::<C64>::zeros();
            for k in kraus {
                out += k * paulis[j] * k.adjoint();
            }
            for i in 0..4 {
                m[(i, j)] = 0.5 * (paulis[i] * out).trace().re;
            }
        }
        Ptm(m)
    }

    pub fn transpose(&self) -> Ptm {
        Ptm(self.0.transpose())
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        (self.0[(0, 0)] - 1.0).abs() <= tol && (1..4).all(|j| self.0[(0, j)].abs() <= tol)
    }

    /// Choi matrix `J = Σ_ij R_ij B_jᵀ ⊗ B_i`, trace `2·R_00`.
    pub fn choi(&self) -> Matrix4<C64> {
        let basis = normalized_basis();
        let mut j = Matrix4::<C64>::zeros();
        for a in 0..4 {
            for b in 0..4 {
                let r = self.0[(a, b)];
                if r != 0.0 {
                    j += kron2(&basis[b].transpose(), &basis[a]) * C64::from(r);
                }
            }
        }
        j
    }

    pub fn from_choi(choi: &Matrix4<C64>) -> Ptm {
        let basis = normalized_basis();
        let m = Matrix4::from_fn(|a, b| {
            let op = kron2(&basis[b].transpose(), &basis[a]);
            (op.adjoint() * choi).trace().re
        });
        Ptm(m)
    }

    /// Eigenvalues of the Choi matrix in ascending order.
    pub fn choi_eigenvalues(&self) -> [f64; 4] {
        let eig = SymmetricEigen::new(self.choi());
        let mut v = [
            eig.eigenvalues[0],
            eig.eigenvalues[1],
            eig.eigenvalues[2],
            eig.eigenvalues[3],
        ];
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn is_completely_positive(&self, tol: f64) -> bool {
        self.choi_eigenvalues()[0] >= -tol
    }

    pub fn is_cptp(&self) -> bool {
        self.is_trace_preserving(1e-12) && self.is_completely_positive(CP_TOLERANCE)
    }

    pub fn max_abs_diff(&self, other: &Ptm) -> f64 {
        (self.0 - other.0).abs().max()
    }

    pub fn apply(&self, v: &Vector4<f64>) -> Vector4<f64> {
        self.0 * v
    }
}

impl Mul for Ptm {
    type Output = Ptm;

    fn mul(self, rhs: Ptm) -> Ptm {
        Ptm(self.0 * rhs.0)
    }
}

impl Mul<&Ptm> for &Ptm {
    type Output = Ptm;

    fn mul(self, rhs: &Ptm) -> Ptm {
        Ptm(self.0 * rhs.0)
    }
}

fn normalized_basis() -> [Matrix2<C64>; 4] {
    PauliLabel::ALL.map(|p| p.matrix() * C64::from(FRAC_1_SQRT_2))
}

/// Kronecker product of two 2×2 complex matrices.
pub fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Pauli twirl `(1/4) Σ_P R_P E R_P`, averaged literally over the four Paulis.
/// Channel with four Kraus operators cut from a Gaussian random 8×2
/// isometry; CPTP by construction.
pub fn random_channel<R: rand::Rng + ?Sized>(rng: &mut R) -> Ptm {
    let g = nalgebra::DMatrix::<C64>::from_fn(8, 2, |_, _| {
        C64::new(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
    });
    let q = g.qr().q();
    let kraus: Vec<Matrix2<C64>> = (0..4)
        .map(|k| Matrix2::from_fn(|r, c| q[(2 * k + r, c)]))
        .collect();
    Ptm::from_kraus(&kraus)
}

pub fn pauli_twirl(e: &Ptm) -> Ptm {
    let mut acc = Matrix4::<f64>::zeros();
    for p in PauliLabel::ALL {
        let rp = p.as_clifford().ptm();
        acc += rp.0 * e.0 * rp.0;
    }
    Ptm(acc / 4.0)
}

/// Pauli probabilities (possibly negative) from channel eigenvalues:
/// `p_Q = ¼ Σ_P χ(P, Q) λ_P`.
pub fn pauli_probs_from_eigenvalues(lambda: [f64; 4]) -> [f64; 4] {
    let mut p = [0.0; 4];
    for q in PauliLabel::ALL {
        p[q.index()] = 0.25
            * PauliLabel::ALL
                .iter()
                .map(|&pp| pp.character(q) * lambda[pp.index()])
                .sum::<f64>();
    }
    p
}

/// Channel eigenvalues from Pauli probabilities: `λ_P = Σ_Q χ(P, Q) p_Q`.
pub fn eigenvalues_from_probs(probs: [f64; 4]) -> [f64; 4] {
    let mut lambda = [0.0; 4];
    for p in PauliLabel::ALL {
        lambda[p.index()] = PauliLabel::ALL
            .iter()
            .map(|&q| p.character(q) * probs[q.index()])
            .sum();
    }
    lambda
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("not a probability vector: {0:?}")]
pub struct NotAProbabilityVector(pub [f64; 4]);

/// Pauli channel probabilities `(p_I, p_X, p_Y, p_Z)` on the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliProbVector([f64; 4]);

impl PauliProbVector {
    pub fn new(p: [f64; 4]) -> Result<PauliProbVector, NotAProbabilityVector> {
        let sum: f64 = p.iter().sum();
        if p.iter().all(|&x| x >= -1e-12) && (sum - 1.0).abs() <= 1e-10 {
            Ok(PauliProbVector(p))
        } else {
            Err(NotAProbabilityVector(p))
        }
    }

    pub fn depolarizing(p: f64) -> PauliProbVector {
        PauliProbVector([1.0 - 0.75 * p, p / 4.0, p / 4.0, p / 4.0])
    }

    pub fn probs(&self) -> [f64; 4] {
        self.0
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        eigenvalues_from_probs(self.0)
    }

    pub fn ptm(&self) -> Ptm {
        Ptm::diagonal(self.eigenvalues())
    }
}
