//! Long-sequence gate-set tomography designs over `{Gi, Gx, Gy}`.
//!
//! Every sequence is `prep ∘ germ^⌊L/|germ|⌋ ∘ meas` (prep acts first). The
//! distinct bare fiducial pairs come first, followed by one block per germ length
//! `L = 1, 2, 4, …`; duplicates keep their first occurrence, so a smaller
//! design is always a prefix of a larger one.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli_algebra::CliffordIndex;
use crate::pfr::{format_circuit_list, CliffordCircuit};

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("max length {0} is not a positive power of two")]
    InvalidMaxLength(u32),
    #[error("design I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("design JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent design: {0}")]
    Inconsistent(String),
}

pub const GATE_LABELS: [&str; 3] = ["Gi", "Gx", "Gy"];

const FIDUCIALS: [&str; 6] = ["", "Gx", "Gy", "Gx Gx", "Gx Gx Gx", "Gy Gy Gy"];

const GERMS: [&str; 11] = [
    "Gi",
    "Gx",
    "Gy",
    "Gx Gy",
    "Gx Gy Gi",
    "Gx Gi Gy",
    "Gx Gi Gi",
    "Gy Gi Gi",
    "Gx Gx Gi Gy",
    "Gx Gy Gy Gi",
    "Gx Gx Gy Gx Gy Gy",
];

/// The three target gates in label order.
pub fn target_gates() -> [CliffordIndex; 3] {
    [
        CliffordIndex::identity(),
        CliffordIndex::x_half(),
        CliffordIndex::y_half(),
    ]
}

pub fn fiducials() -> Vec<CliffordCircuit> {
    FIDUCIALS.iter().map(|s| s.parse().expect("static fiducial")).collect()
}

pub fn germs() -> Vec<CliffordCircuit> {
    GERMS.iter().map(|s| s.parse().expect("static germ")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub id: u64,
    pub prep: CliffordCircuit,
    /// Empty for bare fiducial pairs.
    pub germ: CliffordCircuit,
    /// Germ-length bound `L`; 0 for bare fiducial pairs.
    pub power: u32,
    pub meas: CliffordCircuit,
    pub flat: CliffordCircuit,
}

impl SequenceSpec {
    pub fn repetitions(&self) -> usize {
        if self.germ.is_empty() {
            0
        } else {
            self.power as usize / self.germ.len()
        }
    }
}

/// `prep`, then the germ repeated `⌊power/|germ|⌋` times, then `meas`.
pub fn expand(
    prep: &CliffordCircuit,
    germ: &CliffordCircuit,
    power: u32,
    meas: &CliffordCircuit,
) -> CliffordCircuit {
    let reps = if germ.is_empty() {
        0
    } else {
        power as usize / germ.len()
    };
    let mut gates = Vec::with_capacity(prep.len() + reps * germ.len() + meas.len());
    gates.extend_from_slice(prep.gates());
    for _ in 0..reps {
        gates.extend_from_slice(germ.gates());
    }
    gates.extend_from_slice(meas.gates());
    CliffordCircuit::new(gates)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GstDesign {
    pub gate_labels: Vec<String>,
    pub prep_fiducials: Vec<CliffordCircuit>,
    pub meas_fiducials: Vec<CliffordCircuit>,
    pub germs: Vec<CliffordCircuit>,
    pub max_lengths: Vec<u32>,
    pub sequences: Vec<SequenceSpec>,
}

/// Fiducials, germs and `L = 1, 2, …, l_max`.
pub fn standard_design(l_max: u32) -> Result<GstDesign, DesignError> {
    if l_max == 0 || !l_max.is_power_of_two() {
        return Err(DesignError::InvalidMaxLength(l_max));
    }
    let fids = fiducials();
    let germs = germs();
    let max_lengths: Vec<u32> = (0..=l_max.trailing_zeros()).map(|k| 1 << k).collect();

    let empty = CliffordCircuit::default();
    let mut seen = HashSet::new();
    let mut sequences = Vec::new();
    let mut push = |prep: &CliffordCircuit, germ: &CliffordCircuit, power: u32, meas: &CliffordCircuit| {
        let flat = expand(prep, germ, power, meas);
        if seen.insert(flat.clone()) {
            sequences.push(SequenceSpec {
                id: sequences.len() as u64,
                prep: prep.clone(),
                germ: germ.clone(),
                power,
                meas: meas.clone(),
                flat,
            });
        }
    };
    for meas in &fids {
        for prep in &fids {
            push(prep, &empty, 0, meas);
        }
    }
    for &l in &max_lengths {
        for germ in germs.iter().filter(|g| g.len() <= l as usize) {
            for meas in &fids {
                for prep in &fids {
                    push(prep, germ, l, meas);
                }
            }
        }
    }

    Ok(GstDesign {
        gate_labels: GATE_LABELS.iter().map(|s| s.to_string()).collect(),
        prep_fiducials: fids.clone(),
        meas_fiducials: fids,
        germs,
        max_lengths,
        sequences,
    })
}

impl GstDesign {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn max_length(&self) -> u32 {
        self.max_lengths.last().copied().unwrap_or(0)
    }

    pub fn circuits(&self) -> Vec<CliffordCircuit> {
        self.sequences.iter().map(|s| s.flat.clone()).collect()
    }

    pub fn max_flat_len(&self) -> usize {
        self.sequences.iter().map(|s| s.flat.len()).max().unwrap_or(0)
    }

    /// Id of the sequence whose flat form is `gates`.
    pub fn find(&self, gates: &[CliffordIndex]) -> Option<u64> {
        self.sequences
            .iter()
            .find(|s| s.flat.gates() == gates)
            .map(|s| s.id)
    }

    /// Design restricted to sequences with germ-length bound at most `l`,
    /// ids preserved.
    pub fn truncated(&self, l: u32) -> GstDesign {
        GstDesign {
            max_lengths: self.max_lengths.iter().copied().filter(|&x| x <= l).collect(),
            sequences: self
                .sequences
                .iter()
                .filter(|s| s.power <= l)
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// Checks ids and that every flat form matches its structure.
    pub fn validate(&self) -> Result<(), DesignError> {
        for (i, s) in self.sequences.iter().enumerate() {
            if s.id != i as u64 {
                return Err(DesignError::Inconsistent(format!(
                    "sequence at position {i} has id {}",
                    s.id
                )));
            }
            if expand(&s.prep, &s.germ, s.power, &s.meas) != s.flat {
                return Err(DesignError::Inconsistent(format!(
                    "sequence {} does not expand to its flat form",
                    s.id
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    pub fn from_json(text: &str) -> Result<GstDesign, DesignError> {
        let d: GstDesign = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    /// Flat sequences in the circuit text format, one per line.
    pub fn to_circuit_text(&self) -> String {
        format_circuit_list(self.sequences.iter().map(|s| &s.flat))
    }

    pub fn write_json(&self, path: &Path) -> Result<(), DesignError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<GstDesign, DesignError> {
        GstDesign::from_json(&std::fs::read_to_string(path)?)
    }
}
