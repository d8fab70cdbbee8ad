//! Pauli-frame randomization of Clifford circuits, and lowering of Cliffords to
//! the two-pulse (diatomic) form.
//!
//! A circuit `C_L ⋯ C_1` is rewritten as `D_L ⋯ D_1` with `D_i = C_i P_i` for
//! `i < L` and `D_L = P_{L+1} C_L P_L`. The Paulis `P_1 … P_L` are drawn
//! uniformly and `P_{L+1}` is chosen so the accumulated frame is trivial, so the
//! randomized circuit implements the same ideal operation with the same length.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::pauli_algebra::{
    rotation_unitary, AlgebraError, CliffordIndex, IntPtm, PauliLabel, Ptm,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PfrError {
    #[error("nothing to randomize: circuit is empty")]
    EmptyCircuit,
    #[error("length mismatch: {cliffords} cliffords but {paulis} paulis")]
    LengthMismatch { cliffords: usize, paulis: usize },
    #[error(transparent)]
    Label(#[from] AlgebraError),
    #[error("malformed randomized circuit line: {0}")]
    Malformed(String),
}

/// Ordered Clifford gates; `gates[0]` acts first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CliffordCircuit {
    gates: Vec<CliffordIndex>,
}

impl CliffordCircuit {
    pub fn new(gates: Vec<CliffordIndex>) -> CliffordCircuit {
        CliffordCircuit { gates }
    }

    pub fn gates(&self) -> &[CliffordIndex] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Net Clifford implemented by the circuit.
    pub fn net_clifford(&self) -> CliffordIndex {
        net_clifford(&self.gates)
    }

    /// Composed ideal transfer matrix in exact integer arithmetic.
    pub fn ideal_int_ptm(&self) -> IntPtm {
        ideal_int_ptm(&self.gates)
    }

    pub fn ideal_ptm(&self) -> Ptm {
        self.ideal_int_ptm().to_ptm()
    }
}

impl fmt::Display for CliffordCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_gates(f, &self.gates)
    }
}

impl FromStr for CliffordCircuit {
    type Err = PfrError;

    /// Whitespace-separated `Gi`, `Gx`, `Gy` or `C0`…`C23` tokens.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(CliffordCircuit::new(parse_gates(s)?))
    }
}

impl Serialize for CliffordCircuit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CliffordCircuit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Marker for the empty circuit in circuit-list text.
pub const EMPTY_CIRCUIT: &str = "{}";

/// One circuit per line; the empty circuit is written as `{}`.
pub fn format_circuit_list<'a, I>(circuits: I) -> String
where
    I: IntoIterator<Item = &'a CliffordCircuit>,
{
    let mut out = String::new();
    for c in circuits {
        if c.is_empty() {
            out.push_str(EMPTY_CIRCUIT);
        } else {
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`format_circuit_list`]. Blank lines and `#` comments are skipped.
pub fn parse_circuit_list(text: &str) -> Result<Vec<CliffordCircuit>, PfrError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            if l == EMPTY_CIRCUIT {
                Ok(CliffordCircuit::default())
            } else {
                l.parse()
            }
        })
        .collect()
}

fn write_gates(f: &mut fmt::Formatter<'_>, gates: &[CliffordIndex]) -> fmt::Result {
    for (i, g) in gates.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{g}")?;
    }
    Ok(())
}

pub fn parse_gates(s: &str) -> Result<Vec<CliffordIndex>, PfrError> {
    s.split_whitespace()
        .map(|tok| CliffordIndex::from_label(tok).map_err(PfrError::from))
        .collect()
}

pub fn net_clifford(gates: &[CliffordIndex]) -> CliffordIndex {
    gates
        .iter()
        .fold(CliffordIndex::identity(), |acc, g| g.compose(acc))
}

/// `R_L ⋯ R_1` in integer arithmetic.
pub fn ideal_int_ptm(gates: &[CliffordIndex]) -> IntPtm {
    gates
        .iter()
        .fold(IntPtm::identity(), |acc, g| g.int_ptm() * acc)
}

/// One randomized realization of a circuit, with its frame trace for audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomizedCircuit {
    pub gates: Vec<CliffordIndex>,
    pub frame_trace: Vec<PauliLabel>,
    pub final_frame: PauliLabel,
    pub rng_seed: u64,
}

impl RandomizedCircuit {
    pub fn circuit(&self) -> CliffordCircuit {
        CliffordCircuit::new(self.gates.clone())
    }

    /// Line format: `seed=<u64> frames=<IXYZ…> final=<P> gates=<g> <g> …`.
    pub fn to_line(&self) -> String {
        let frames: String = self.frame_trace.iter().map(|p| p.as_char()).collect();
        let gates = self
            .gates
            .iter()
            .map(|g| g.label())
            .collect::<Vec<_>>()
            .join(" ");
        format!(
            "seed={} frames={} final={} gates={}",
            self.rng_seed, frames, self.final_frame, gates
        )
    }

    pub fn from_line(line: &str) -> Result<RandomizedCircuit, PfrError> {
        let bad = || PfrError::Malformed(line.to_string());
        let rest = line.trim().strip_prefix("seed=").ok_or_else(bad)?;
        let (seed, rest) = rest.split_once(' ').ok_or_else(bad)?;
        let rest = rest.trim_start().strip_prefix("frames=").ok_or_else(bad)?;
        let (frames, rest) = rest.split_once(' ').ok_or_else(bad)?;
        let rest = rest.trim_start().strip_prefix("final=").ok_or_else(bad)?;
        let (final_frame, rest) = rest.split_once(' ').ok_or_else(bad)?;
        let gates = rest.trim_start().strip_prefix("gates=").ok_or_else(bad)?;

        let rng_seed = seed.parse::<u64>().map_err(|_| bad())?;
        let frame_trace = frames
            .chars()
            .map(|c| PauliLabel::from_char(c).ok_or_else(bad))
            .collect::<Result<Vec<_>, _>>()?;
        let mut ff = final_frame.chars();
        let final_frame = match (ff.next().and_then(PauliLabel::from_char), ff.next()) {
            (Some(p), None) => p,
            _ => return Err(bad()),
        };
        let gates = parse_gates(gates)?;
        if gates.len() != frame_trace.len() {
            return Err(bad());
        }
        Ok(RandomizedCircuit {
            gates,
            frame_trace,
            final_frame,
            rng_seed,
        })
    }
}

/// Draw `len` frame Paulis uniformly.
pub fn sample_frames<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<PauliLabel> {
    (0..len)
        .map(|_| PauliLabel::from_index(rng.random_range(0..4)))
        .collect()
}

/// `P_{L+1}` such that the accumulated frame `P_{L+1:1}` is trivial.
///
/// Uses `P_{1:1} = P_1` and `P_{n:1} = P_n · (P_{n-1:1} conjugated by C_{n-1})`.
pub fn frame_correction(
    cliffords: &[CliffordIndex],
    paulis: &[PauliLabel],
) -> Result<PauliLabel, PfrError> {
    if cliffords.len() != paulis.len() {
        return Err(PfrError::LengthMismatch {
            cliffords: cliffords.len(),
            paulis: paulis.len(),
        });
    }
    let Some((&last, _)) = cliffords.split_last() else {
        return Ok(PauliLabel::I);
    };
    let mut frame = paulis[0];
    for n in 1..paulis.len() {
        frame = paulis[n] * cliffords[n - 1].conjugate(frame);
    }
    Ok(last.conjugate(frame))
}

/// Randomized gates for explicit frame draws, written into `out`.
/// Returns the final frame. `cliffords` must be non-empty and as long as `paulis`.
pub fn randomized_gates_into(
    cliffords: &[CliffordIndex],
    paulis: &[PauliLabel],
    out: &mut Vec<CliffordIndex>,
) -> Result<PauliLabel, PfrError> {
    if cliffords.is_empty() {
        return Err(PfrError::EmptyCircuit);
    }
    let final_frame = frame_correction(cliffords, paulis)?;
    out.clear();
    out.extend(
        cliffords
            .iter()
            .zip(paulis)
            .map(|(c, p)| c.compose(p.as_clifford())),
    );
    let last = out.last_mut().expect("non-empty");
    *last = final_frame.as_clifford().compose(*last);
    Ok(final_frame)
}

/// Randomize with explicitly supplied frame draws (for enumeration and tests).
pub fn randomize_with_frames(
    circuit: &CliffordCircuit,
    paulis: Vec<PauliLabel>,
    rng_seed: u64,
) -> Result<RandomizedCircuit, PfrError> {
    let mut gates = Vec::with_capacity(circuit.len());
    let final_frame = randomized_gates_into(circuit.gates(), &paulis, &mut gates)?;
    Ok(RandomizedCircuit {
        gates,
        frame_trace: paulis,
        final_frame,
        rng_seed,
    })
}

/// Randomize with frames drawn from a ChaCha stream seeded by `seed`.
pub fn randomize(circuit: &CliffordCircuit, seed: u64) -> Result<RandomizedCircuit, PfrError> {
    if circuit.is_empty() {
        return Err(PfrError::EmptyCircuit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paulis = sample_frames(&mut rng, circuit.len());
    randomize_with_frames(circuit, paulis, seed)
}

/// True iff both circuits have entry-wise equal composed ideal transfer matrices.
pub fn verify_equivalence(source: &CliffordCircuit, randomized: &RandomizedCircuit) -> bool {
    ideal_int_ptm(source.gates()) == ideal_int_ptm(&randomized.gates)
}

/// Virtual Z-frame update angles available to the diatomic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZAngle {
    Zero,
    PlusHalfPi,
    MinusHalfPi,
    Pi,
}

impl ZAngle {
    pub const ALL: [ZAngle; 4] = [ZAngle::Zero, ZAngle::PlusHalfPi, ZAngle::MinusHalfPi, ZAngle::Pi];

    pub fn radians(self) -> f64 {
        match self {
            ZAngle::Zero => 0.0,
            ZAngle::PlusHalfPi => FRAC_PI_2,
            ZAngle::MinusHalfPi => -FRAC_PI_2,
            ZAngle::Pi => PI,
        }
    }

    pub fn as_clifford(self) -> CliffordIndex {
        static TABLE: OnceLock<[CliffordIndex; 4]> = OnceLock::new();
        TABLE.get_or_init(|| {
            ZAngle::ALL.map(|a| {
                CliffordIndex::from_unitary(&rotation_unitary([0.0, 0.0, 1.0], a.radians()))
                    .expect("z rotations by multiples of π/2 are Clifford")
            })
        })[self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pulse {
    /// Physical `X_π/2` pulse of fixed duration.
    X90,
    /// Virtual, zero-duration Z-frame update.
    Z(ZAngle),
}

/// Time-ordered pulses realizing one Clifford as
/// `Z(θ₃) · X_π/2 · Z(θ₂) · X_π/2 · Z(θ₁)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseProgram {
    pub angles: [ZAngle; 3],
    pub pulses: Vec<Pulse>,
}

impl PulseProgram {
    fn from_angles(angles: [ZAngle; 3]) -> PulseProgram {
        let mut pulses = Vec::with_capacity(5);
        for (k, a) in angles.iter().enumerate() {
            if *a != ZAngle::Zero {
                pulses.push(Pulse::Z(*a));
            }
            if k < 2 {
                pulses.push(Pulse::X90);
            }
        }
        PulseProgram { angles, pulses }
    }

    pub fn physical_pulse_count(&self) -> usize {
        self.pulses.iter().filter(|p| matches!(p, Pulse::X90)).count()
    }

    /// Net Clifford of the pulse program, evaluated pulse by pulse.
    pub fn net_clifford(&self) -> CliffordIndex {
        let x90 = CliffordIndex::x_half();
        self.pulses.iter().fold(CliffordIndex::identity(), |acc, p| {
            let g = match p {
                Pulse::X90 => x90,
                Pulse::Z(a) => a.as_clifford(),
            };
            g.compose(acc)
        })
    }
}

/// Diatomic pulse program for a Clifford. The table is built once by
/// exhaustive search over the 4³ angle triples; the first match in
/// `(θ₁, θ₂, θ₃)` enumeration order is kept.
pub fn diatomic_compile(c: CliffordIndex) -> PulseProgram {
    static TABLE: OnceLock<Vec<PulseProgram>> = OnceLock::new();
    TABLE.get_or_init(build_diatomic_table)[c.index()].clone()
}

fn build_diatomic_table() -> Vec<PulseProgram> {
    let mut table: Vec<Option<PulseProgram>> = vec![None; crate::pauli_algebra::NUM_CLIFFORDS];
    for a1 in ZAngle::ALL {
        for a2 in ZAngle::ALL {
            for a3 in ZAngle::ALL {
                let prog = PulseProgram::from_angles([a1, a2, a3]);
                let slot = &mut table[prog.net_clifford().index()];
                if slot.is_none() {
                    *slot = Some(prog);
                }
            }
        }
    }
    table
        .into_iter()
        .map(|p| p.expect("diatomic search covers every Clifford"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli_algebra::Ptm;
    use nalgebra::Matrix2;

    fn g(label: &str) -> CliffordIndex {
        CliffordIndex::from_label(label).unwrap()
    }

    #[test]
    fn empty_circuit_is_rejected() {
        assert_eq!(
            randomize(&CliffordCircuit::default(), 1),
            Err(PfrError::EmptyCircuit)
        );
    }

    #[test]
    fn single_identity_with_forced_x() {
        let c = CliffordCircuit::new(vec![CliffordIndex::identity()]);
        let r = randomize_with_frames(&c, vec![PauliLabel::X], 0).unwrap();
        assert_eq!(r.final_frame, PauliLabel::X);
        assert_eq!(r.gates, vec![CliffordIndex::identity()]);
        assert_eq!(r.circuit().ideal_ptm(), Ptm::identity());
    }

    #[test]
    fn two_x_halves_all_draws() {
        let c = CliffordCircuit::new(vec![CliffordIndex::x_half(); 2]);
        let x_pi = PauliLabel::X.as_clifford().ptm();
        for a in PauliLabel::ALL {
            for b in PauliLabel::ALL {
                let r = randomize_with_frames(&c, vec![a, b], 0).unwrap();
                assert_eq!(r.circuit().ideal_ptm(), x_pi);
            }
        }
    }

    #[test]
    fn frame_correction_examples() {
        let c = vec![g("Gx"); 4];
        assert_eq!(frame_correction(&c, &[PauliLabel::I; 4]).unwrap(), PauliLabel::I);
        assert_eq!(
            frame_correction(&[CliffordIndex::identity()], &[PauliLabel::Y]).unwrap(),
            PauliLabel::Y
        );
        assert!(matches!(
            frame_correction(&c, &[PauliLabel::I; 3]),
            Err(PfrError::LengthMismatch { .. })
        ));
    }

    /// Brute-force oracle: push every inserted Pauli to the end of the circuit
    /// as a 2×2 matrix and read off the residual, up to phase.
    fn residual_by_unitaries(cliffords: &[CliffordIndex], paulis: &[PauliLabel]) -> PauliLabel {
        let mut residual = Matrix2::identity();
        for (i, p) in paulis.iter().enumerate() {
            let mut m = p.matrix();
            for c in &cliffords[i..] {
                let u = c.unitary();
                m = u * m * u.adjoint();
            }
            residual = m * residual;
        }
        PauliLabel::ALL
            .into_iter()
            .find(|q| (q.matrix().adjoint() * residual).trace().norm() > 1.9)
            .unwrap()
    }

    #[test]
    fn frame_correction_matches_unitary_propagation() {
        let c = [CliffordIndex::x_half(), CliffordIndex::z_half(), CliffordIndex::hadamard()];
        let p = [PauliLabel::X, PauliLabel::Z, PauliLabel::Y];
        let expected = residual_by_unitaries(&c, &p);
        assert_eq!(frame_correction(&c, &p).unwrap(), expected);
        // Frozen value of the brute-force oracle for this instance.
        assert_eq!(expected, PauliLabel::X);

        for a in CliffordIndex::all() {
            for b in CliffordIndex::all() {
                for p0 in PauliLabel::ALL {
                    for p1 in PauliLabel::ALL {
                        let cs = [a, b];
                        let ps = [p0, p1];
                        assert_eq!(
                            frame_correction(&cs, &ps).unwrap(),
                            residual_by_unitaries(&cs, &ps)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn corrupted_frame_breaks_equivalence() {
        let c: CliffordCircuit = "Gx Gy Gi Gx".parse().unwrap();
        let mut r = randomize(&c, 11).unwrap();
        assert!(verify_equivalence(&c, &r));
        let last = r.gates.len() - 1;
        r.gates[last] = PauliLabel::X.as_clifford().compose(r.gates[last]);
        assert!(!verify_equivalence(&c, &r));
    }

    #[test]
    fn determinism() {
        let c: CliffordCircuit = "Gx Gy Gx Gx Gi C5 C17".parse().unwrap();
        assert_eq!(randomize(&c, 42).unwrap(), randomize(&c, 42).unwrap());
    }

    #[test]
    fn uniform_frame_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let positions = 5;
        let draws = 100_000;
        let mut counts = vec![[0usize; 4]; positions];
        for _ in 0..draws {
            for (i, p) in sample_frames(&mut rng, positions).into_iter().enumerate() {
                counts[i][p.index()] += 1;
            }
        }
        for row in counts {
            for c in row {
                let f = c as f64 / draws as f64;
                assert!((f - 0.25).abs() <= 0.01, "frequency {f}");
            }
        }
    }

    #[test]
    fn line_format_round_trip() {
        let c: CliffordCircuit = "Gx Gy Gi C7".parse().unwrap();
        let r = randomize(&c, 99).unwrap();
        let line = r.to_line();
        assert!(line.starts_with("seed=99 frames="));
        assert_eq!(RandomizedCircuit::from_line(&line).unwrap(), r);
        assert!(RandomizedCircuit::from_line("seed=x frames=I final=I gates=Gi").is_err());
        assert!(RandomizedCircuit::from_line("seed=1 frames=II final=I gates=Gi").is_err());
    }

    #[test]
    fn diatomic_covers_all_cliffords() {
        for c in CliffordIndex::all() {
            let prog = diatomic_compile(c);
            assert_eq!(prog.physical_pulse_count(), 2);
            assert!(prog.pulses.len() - 2 <= 3);
            // PTM of the pulse sequence equals the Clifford exactly.
            let x = CliffordIndex::x_half().ptm();
            let z = |a: ZAngle| a.as_clifford().ptm();
            let [a1, a2, a3] = prog.angles;
            assert_eq!(z(a3) * x * z(a2) * x * z(a1), c.ptm());
        }
    }

    #[test]
    fn diatomic_examples() {
        let id = diatomic_compile(CliffordIndex::identity());
        assert!(id.angles.contains(&ZAngle::Pi));
        assert_eq!(id.net_clifford(), CliffordIndex::identity());
        let xh = diatomic_compile(CliffordIndex::x_half());
        assert_eq!(xh.net_clifford(), CliffordIndex::x_half());
        // Frozen canonical choices from the exhaustive search.
        assert_eq!(id.angles, [ZAngle::Zero, ZAngle::Pi, ZAngle::Pi]);
    }

    #[test]
    fn circuit_list_round_trip() {
        let list = vec![
            CliffordCircuit::default(),
            "Gx Gy C7".parse().unwrap(),
            "Gi".parse().unwrap(),
        ];
        let text = format_circuit_list(&list);
        assert_eq!(text, "{}\nGx Gy C7\nGi\n");
        assert_eq!(parse_circuit_list(&format!("# header\n\n{text}")).unwrap(), list);
        let json = serde_json::to_string(&list[1]).unwrap();
        assert_eq!(json, "\"Gx Gy C7\"");
        assert_eq!(serde_json::from_str::<CliffordCircuit>(&json).unwrap(), list[1]);
    }
}
