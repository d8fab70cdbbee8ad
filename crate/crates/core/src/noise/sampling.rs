use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::channel::{clamp_probability, NoiseKernel, NoisyGateSet};
use super::{Dataset, DatasetMetadata, DatasetRow, DriftTrajectory, NoiseConfig, NoiseError, SpamConfig};
use crate::pauli_algebra::{CliffordIndex, PauliLabel};
use crate::pfr::{randomized_gates_into, sample_frames, CliffordCircuit};

const SAMPLING_FLOOR: f64 = 1e-12;

/// Name of the within-round shot ordering recorded in dataset metadata.
pub const ORDERING: &str = "sequence-major";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Randomized,
    Plain,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Randomized => "randomized",
            Arm::Plain => "plain",
        }
    }
}

/// Interleaving plan. Shots run in rounds; in each round every sequence in
/// order receives `interleave_block` consecutive shots per arm, arms in the
/// listed order. The drift clock counts every shot of every arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub interleave_block: u64,
    pub arms: Vec<Arm>,
    /// Distinct randomizations per sequence, reused cyclically; `None` means
    /// one per randomized shot.
    pub n_randomizations: Option<u64>,
}

impl Schedule {
    pub fn interleaved(interleave_block: u64) -> Schedule {
        Schedule {
            interleave_block,
            arms: vec![Arm::Randomized, Arm::Plain],
            n_randomizations: None,
        }
    }

    pub fn single(arm: Arm, interleave_block: u64) -> Schedule {
        Schedule {
            interleave_block,
            arms: vec![arm],
            n_randomizations: None,
        }
    }

    fn validate(&self, n_shots: u64) -> Result<(), NoiseError> {
        let bad = |m: String| Err(NoiseError::InvalidSampling(m));
        if n_shots == 0 {
            return bad("n_shots must be at least 1".into());
        }
        if self.interleave_block == 0 || !n_shots.is_multiple_of(self.interleave_block) {
            return bad(format!(
                "n_shots = {n_shots} is not a positive multiple of interleave_block = {}",
                self.interleave_block
            ));
        }
        if self.arms.is_empty() {
            return bad("schedule has no arms".into());
        }
        let mut sorted = self.arms.clone();
        sorted.sort_by_key(|a| a.as_str());
        sorted.dedup();
        if sorted.len() != self.arms.len() {
            return bad("schedule lists an arm twice".into());
        }
        if self.n_randomizations == Some(0) {
            return bad("n_randomizations must be at least 1".into());
        }
        Ok(())
    }
}

/// Consecutive shots of one arm on one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub arm: Arm,
    pub sequence_id: u64,
    pub first_shot_index: u64,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledData {
    pub randomized: Option<Dataset>,
    pub plain: Option<Dataset>,
    pub blocks: Vec<BlockRecord>,
    pub total_shots: u64,
}

impl SampledData {
    pub fn arm(&self, arm: Arm) -> Option<&Dataset> {
        match arm {
            Arm::Randomized => self.randomized.as_ref(),
            Arm::Plain => self.plain.as_ref(),
        }
    }
}

/// Seed of randomization `index` of sequence `sequence_id`; feeding it to
/// [`crate::pfr::randomize`] reproduces the sampled circuit.
pub fn randomization_seed(base: u64, sequence_id: u64, index: u64) -> u64 {
    let mut z = base
        ^ sequence_id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(29);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Binomial counts for independent `n`-shot experiments at each probability.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    probs
        .iter()
        .map(|&p| {
            let p = p.clamp(0.0, 1.0);
            Binomial::new(n, p).expect("probability in [0, 1]").sample(rng)
        })
        .collect()
}

struct ShotContext<'a> {
    rho: nalgebra::Vector4<f64>,
    effect: nalgebra::Vector4<f64>,
    seed: u64,
    n_randomizations: Option<u64>,
    frames: Vec<PauliLabel>,
    buffer: Vec<CliffordIndex>,
    sequences: &'a [CliffordCircuit],
}

impl ShotContext<'_> {
    fn probability(&mut self, set: &NoisyGateSet, arm: Arm, seq: usize, shot_of_seq: u64) -> f64 {
        let gates = self.sequences[seq].gates();
        let p = match arm {
            Arm::Randomized if !gates.is_empty() => {
                let r = match self.n_randomizations {
                    Some(m) => shot_of_seq % m,
                    None => shot_of_seq,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(randomization_seed(self.seed, seq as u64, r));
                self.frames = sample_frames(&mut rng, gates.len());
                randomized_gates_into(gates, &self.frames, &mut self.buffer)
                    .expect("non-empty circuit with matching frames");
                set.raw_probability(&self.buffer, &self.rho, &self.effect)
            }
            _ => set.raw_probability(gates, &self.rho, &self.effect),
        };
        clamp_probability(p).clamp(SAMPLING_FLOOR, 1.0 - SAMPLING_FLOOR)
    }
}

/// Simulates every shot of the schedule in a single stream and aggregates
/// the outcomes into one dataset per arm. Sequence ids are slice positions.
pub fn sample_dataset(
    sequences: &[CliffordCircuit],
    n_shots: u64,
    noise: &NoiseConfig,
    spam: &SpamConfig,
    seed: u64,
    schedule: &Schedule,
) -> Result<SampledData, NoiseError> {
    noise.validate()?;
    spam.validate()?;
    schedule.validate(n_shots)?;

    let block = schedule.interleave_block;
    let rounds = n_shots / block;
    let kernel = NoiseKernel::new(noise);
    let static_set = noise.drift.is_static().then(|| kernel.at(0.0));
    let mut drift = DriftTrajectory::new(&noise.drift);
    let mut outcome_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ctx = ShotContext {
        rho: spam.effective_rho(),
        effect: spam.effective_effect(),
        seed,
        n_randomizations: schedule.n_randomizations,
        frames: Vec::new(),
        buffer: Vec::new(),
        sequences,
    };

    let mut plain_cache: Vec<Option<f64>> = vec![None; sequences.len()];
    let mut ones: Vec<Vec<u64>> = vec![vec![0; sequences.len()]; schedule.arms.len()];
    let mut blocks = Vec::with_capacity(rounds as usize * sequences.len() * schedule.arms.len());
    let mut clock = 0u64;

    for round in 0..rounds {
        for seq in 0..sequences.len() {
            for (a, &arm) in schedule.arms.iter().enumerate() {
                blocks.push(BlockRecord {
                    arm,
                    sequence_id: seq as u64,
                    first_shot_index: clock,
                    shots: block,
                });
                for j in 0..block {
                    let shot_of_seq = round * block + j;
                    let p = match (&static_set, arm) {
                        (Some(set), Arm::Plain) => *plain_cache[seq]
                            .get_or_insert_with(|| ctx.probability(set, arm, seq, shot_of_seq)),
                        (Some(set), Arm::Randomized) => ctx.probability(set, arm, seq, shot_of_seq),
                        (None, _) => {
                            let set = kernel.at(drift.value_at(clock));
                            ctx.probability(&set, arm, seq, shot_of_seq)
                        }
                    };
                    if outcome_rng.random::<f64>() < p {
                        ones[a][seq] += 1;
                    }
                    clock += 1;
                }
            }
        }
    }

    let digest = noise.digest();
    let mut out = SampledData {
        randomized: None,
        plain: None,
        blocks,
        total_shots: clock,
    };
    for (a, &arm) in schedule.arms.iter().enumerate() {
        let rows = ones[a]
            .iter()
            .enumerate()
            .map(|(i, &k)| DatasetRow {
                sequence_id: i as u64,
                n: n_shots,
                k,
            })
            .collect();
        let metadata = DatasetMetadata {
            seed,
            noise_digest: digest.clone(),
            randomized: arm == Arm::Randomized,
            n_randomizations: (arm == Arm::Randomized)
                .then(|| schedule.n_randomizations.unwrap_or(n_shots)),
            interleave_block: Some(block),
            ordering: Some(ORDERING.to_string()),
        };
        let d = Dataset::new(rows, metadata)?;
        match arm {
            Arm::Randomized => out.randomized = Some(d),
            Arm::Plain => out.plain = Some(d),
        }
    }
    Ok(out)
}
