use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Vector4};
use rayon::prelude::*;

use super::model::{GateSetModel, GATE_PARAMS};
use super::EstimationError;
use crate::gst_design::GstDesign;
use crate::noise::Dataset;
use crate::pauli_algebra::CliffordIndex;

/// Probabilities are clamped to `[P_FLOOR, 1 - P_FLOOR]` inside logs.
pub const P_FLOOR: f64 = 1e-9;

const CHUNK: usize = 64;

/// Fit-ready view of a dataset: per-sequence gate positions into a model's
/// gate list, shots and "1" counts (real-valued so exact expectations can
/// stand in for sampled data).
#[derive(Debug, Clone)]
pub struct Observations {
    pub labels: Vec<CliffordIndex>,
    pub ids: Vec<u64>,
    pub seqs: Vec<Vec<u8>>,
    pub power: Vec<u32>,
    pub n: Vec<f64>,
    pub k: Vec<f64>,
}

fn compile(labels: &[CliffordIndex], gates: &[CliffordIndex]) -> Result<Vec<u8>, EstimationError> {
    gates
        .iter()
        .map(|g| {
            labels
                .iter()
                .position(|l| l == g)
                .map(|i| i as u8)
                .ok_or_else(|| EstimationError::UnknownGate(g.label()))
        })
        .collect()
}

impl Observations {
    /// Rows matched to design sequences by id; rows with `n = 0` are dropped.
    pub fn from_dataset(
        dataset: &Dataset,
        design: &GstDesign,
        labels: &[CliffordIndex],
    ) -> Result<Observations, EstimationError> {
        let mut labels = labels.to_vec();
        labels.sort_by_key(|c| c.label());
        let by_id: HashMap<u64, usize> = design
            .sequences
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id, i))
            .collect();
        let mut obs = Observations::empty(labels);
        for row in dataset.rows.iter().filter(|r| r.n > 0) {
            let &pos = by_id
                .get(&row.sequence_id)
                .ok_or(EstimationError::UnknownSequence(row.sequence_id))?;
            let spec = &design.sequences[pos];
            obs.ids.push(spec.id);
            obs.seqs.push(compile(&obs.labels, spec.flat.gates())?);
            obs.power.push(spec.power);
            obs.n.push(row.n as f64);
            obs.k.push(row.k as f64);
        }
        Ok(obs)
    }

    /// Expected counts `k = n·p` under `model` for every design sequence.
    pub fn expected(model: &GateSetModel, design: &GstDesign, n: f64) -> Result<Observations, EstimationError> {
        let mut obs = Observations::empty(model.labels());
        for spec in &design.sequences {
            let seq = compile(&obs.labels, spec.flat.gates())?;
            let p = model.probability_indexed(&seq).clamp(0.0, 1.0);
            obs.ids.push(spec.id);
            obs.seqs.push(seq);
            obs.power.push(spec.power);
            obs.n.push(n);
            obs.k.push(n * p);
        }
        Ok(obs)
    }

    fn empty(labels: Vec<CliffordIndex>) -> Observations {
        Observations {
            labels,
            ids: Vec::new(),
            seqs: Vec::new(),
            power: Vec::new(),
            n: Vec::new(),
            k: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    /// Sequences with germ-length bound at most `max_power`.
    pub fn truncated(&self, max_power: u32) -> Observations {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.power[i] <= max_power).collect();
        Observations {
            labels: self.labels.clone(),
            ids: keep.iter().map(|&i| self.ids[i]).collect(),
            seqs: keep.iter().map(|&i| self.seqs[i].clone()).collect(),
            power: keep.iter().map(|&i| self.power[i]).collect(),
            n: keep.iter().map(|&i| self.n[i]).collect(),
            k: keep.iter().map(|&i| self.k[i]).collect(),
        }
    }

    /// Same sequences with replaced counts.
    pub fn with_counts(&self, k: Vec<f64>) -> Observations {
        assert_eq!(k.len(), self.len());
        Observations { k, ..self.clone() }
    }

    /// Distinct germ-length bounds in increasing order.
    pub fn powers(&self) -> Vec<u32> {
        let mut p = self.power.clone();
        p.sort_unstable();
        p.dedup();
        p
    }

    pub fn frequency(&self, id: u64) -> Option<f64> {
        self.ids
            .iter()
            .position(|&i| i == id)
            .map(|pos| self.k[pos] / self.n[pos])
    }
}

fn binomial_term(n: f64, k: f64, p: f64) -> f64 {
    let p = p.clamp(P_FLOOR, 1.0 - P_FLOOR);
    let mut l = 0.0;
    if k > 0.0 {
        l += k * p.ln();
    }
    if n - k > 0.0 {
        l += (n - k) * (1.0 - p).ln();
    }
    l
}

/// `Σ k log p + (n-k) log(1-p)` with clamped probabilities.
pub fn log_likelihood(model: &GateSetModel, obs: &Observations) -> f64 {
    let partial: Vec<f64> = (0..obs.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&i| binomial_term(obs.n[i], obs.k[i], model.probability_indexed(&obs.seqs[i])))
                .sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

/// Sequence probabilities predicted by `model`, clamped to `[0, 1]`.
pub fn predicted_probabilities(model: &GateSetModel, obs: &Observations) -> Vec<f64> {
    obs.seqs
        .par_iter()
        .map(|s| model.probability_indexed(s).clamp(0.0, 1.0))
        .collect()
}

/// `∂p/∂x` for one sequence in the trace-preserving parameterization.
fn probability_gradient(
    model: &GateSetModel,
    seq: &[u8],
    forward: &mut Vec<Vector4<f64>>,
    grad: &mut DVector<f64>,
) -> f64 {
    forward.clear();
    let mut v = model.rho;
    forward.push(v);
    for &g in seq {
        v = model.gates[g as usize].1 .0 * v;
        forward.push(v);
    }
    let p = model.effect.dot(&v);
    grad.fill(0.0);
    let mut b = model.effect;
    for t in (0..seq.len()).rev() {
        let g = seq[t] as usize;
        let f = &forward[t];
        let base = GATE_PARAMS * g;
        for i in 1..4 {
            for j in 0..4 {
                grad[base + 4 * (i - 1) + j] += b[i] * f[j];
            }
        }
        b = model.gates[g].1 .0.transpose() * b;
    }
    let spam = GATE_PARAMS * model.gates.len();
    for i in 1..4 {
        grad[spam + i - 1] = b[i];
    }
    for i in 0..4 {
        grad[spam + 3 + i] = v[i];
    }
    p
}

/// Curvature weight per sequence: `n/(p(1−p))` is the expected Fisher
/// information; `k/p² + (n−k)/(1−p)²` is the observed one without the
/// second-derivative term, which stays accurate where the data pin `p` to 0
/// or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Information {
    Expected,
    Observed,
}

/// Log-likelihood, score and expected Fisher information.
pub(crate) fn score_and_fisher(
    model: &GateSetModel,
    obs: &Observations,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    score_and_information(model, obs, Information::Expected)
}

pub(crate) fn score_and_information(
    model: &GateSetModel,
    obs: &Observations,
    info: Information,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let dim = model.param_count;
    let partial: Vec<(f64, DVector<f64>, DMatrix<f64>)> = (0..obs.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut l = 0.0;
            let mut score = DVector::zeros(dim);
            let mut fisher = DMatrix::zeros(dim, dim);
            let mut forward = Vec::new();
            let mut dp = DVector::zeros(dim);
            for &i in chunk {
                let (n, k) = (obs.n[i], obs.k[i]);
                let raw = probability_gradient(model, &obs.seqs[i], &mut forward, &mut dp);
                l += binomial_term(n, k, raw);
                let p = raw.clamp(P_FLOOR, 1.0 - P_FLOOR);
                let w = k / p - (n - k) / (1.0 - p);
                score.axpy(w, &dp, 1.0);
                let weight = match info {
                    Information::Expected => n / (p * (1.0 - p)),
                    Information::Observed => k / (p * p) + (n - k) / ((1.0 - p) * (1.0 - p)),
                };
                fisher.ger(weight, &dp, &dp, 1.0);
            }
            (l, score, fisher)
        })
        .collect();
    let mut l = 0.0;
    let mut score = DVector::zeros(dim);
    let mut fisher = DMatrix::zeros(dim, dim);
    for (pl, ps, pf) in partial {
        l += pl;
        score += ps;
        fisher += pf;
    }
    (l, score, fisher)
}
