//! Stabilizer-code perceptrons.
//!
//! A perceptron measures one parameterized generator
//! `G(θ) = U†(θ) G U(θ)`, with `G` a product of Pauli `Z` on some support and
//! `U(θ) = Π_q R_y(θ_q)`, through a Hadamard test on an ancilla. The
//! prediction value is the expectation of the parity operator
//! `(I + G(θ))/2`, which equals the probability of reading the ancilla as 0.
//!
//! Labels are `y ∈ {0, 1}`; a value of at least 0.5 predicts 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{build_exact_circuit, pad_and_repair, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::sim::{apply, Circuit, CircuitOp, Control, StateVector};

pub const LABEL_THRESHOLD: f64 = 0.5;

/// Pauli-`Z` supports of the generators measured in one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizerSpec {
    pub supports: Vec<Vec<usize>>,
}

impl StabilizerSpec {
    /// One generator `Z_1 ⋯ Z_n`.
    pub fn single(n: usize) -> Self {
        StabilizerSpec {
            supports: vec![(1..=n).collect()],
        }
    }

    /// Hidden layer: `Z_1 ⋯ Z_{n/2}` and `Z_{n/2+1} ⋯ Z_n`.
    pub fn hidden_layer(n: usize) -> Self {
        let h = n / 2;
        StabilizerSpec {
            supports: vec![(1..=h).collect(), (h + 1..=n).collect()],
        }
    }

    /// Output layer: `Z_{n+1} Z_{n+2}` on the two hidden ancillas.
    pub fn output_layer(n: usize) -> Self {
        StabilizerSpec {
            supports: vec![vec![n + 1, n + 2]],
        }
    }

    pub fn supports_disjoint(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.supports.iter().flatten().all(|q| seen.insert(*q))
    }

    /// Circuit for `G_k(θ)` on `n_qubits` qubits; `theta[i]` rotates qubit
    /// `i + 1`. Only the rotations on the generator's support are emitted,
    /// the others cancel.
    pub fn generator_circuit(&self, k: usize, theta: &[f64], n_qubits: usize) -> Result<Circuit> {
        let support = self.supports.get(k).ok_or_else(|| {
            Error::InvalidParameter(format!("generator {k} of {}", self.supports.len()))
        })?;
        let mut c = Circuit::new(n_qubits);
        c.append(&rotation_layer(support, theta, n_qubits)?)?;
        c.append(&z_string(support, n_qubits)?)?;
        c.append(&rotation_layer(support, theta, n_qubits)?.inverse())?;
        Ok(c)
    }
}

/// `Π R_y(θ_q)` over `qubits`, reading the angle of qubit `q` from
/// `theta[q − 1]`.
fn rotation_layer(qubits: &[usize], theta: &[f64], n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    for &q in qubits {
        let angle = *theta.get(q - 1).ok_or(Error::DimensionMismatch {
            expected: q,
            actual: theta.len(),
        })?;
        c.push(CircuitOp::Ry { target: q, angle })?;
    }
    Ok(c)
}

fn z_string(qubits: &[usize], n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    for &q in qubits {
        c.push(CircuitOp::Z { target: q })?;
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    SingleQp,
    TwoLayer,
}

impl Architecture {
    pub fn parameter_count(self, n: usize) -> usize {
        match self {
            Architecture::SingleQp => n,
            Architecture::TwoLayer => n + 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub iterations: usize,
    pub evaluations: usize,
    pub final_train_cost: Option<f64>,
    pub train_size: usize,
    pub wall_ms: u128,
    /// CSV with `(iteration, cost_best, cost_current, wall_ms)` rows.
    pub trace_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnModel {
    pub architecture: Architecture,
    /// Data qubits.
    pub n: usize,
    /// `SingleQp`: `n` angles. `TwoLayer`: `n` hidden angles then 2 output angles.
    pub theta: Vec<f64>,
    #[serde(default)]
    pub training_meta: TrainingMeta,
}

impl QnnModel {
    /// Untrained model with all angles zero.
    pub fn new(architecture: Architecture, n: usize) -> Result<Self> {
        Self::with_theta(architecture, n, vec![0.0; architecture.parameter_count(n)])
    }

    pub fn with_theta(architecture: Architecture, n: usize, theta: Vec<f64>) -> Result<Self> {
        let model = QnnModel {
            architecture,
            n,
            theta,
            training_meta: TrainingMeta::default(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter(
                "model needs at least one data qubit".into(),
            ));
        }
        if self.architecture == Architecture::TwoLayer && (self.n < 2 || !self.n.is_multiple_of(2))
        {
            return Err(Error::InvalidParameter(format!(
                "two-layer model needs an even number of data qubits, got {}",
                self.n
            )));
        }
        let expected = self.architecture.parameter_count(self.n);
        if self.theta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.theta.len(),
            });
        }
        if let Some(bad) = self.theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite angle {bad}")));
        }
        Ok(())
    }

    /// Full measurement circuit on data plus ancilla qubits.
    pub fn circuit(&self) -> Result<Circuit> {
        match self.architecture {
            Architecture::SingleQp => perceptron_circuit(self.n, &self.theta),
            Architecture::TwoLayer => {
                let (h, o) = self.theta.split_at(self.n);
                qnn2_circuit(self.n, h, o)
            }
        }
    }

    pub fn total_qubits(&self) -> usize {
        match self.architecture {
            Architecture::SingleQp => self.n + 1,
            Architecture::TwoLayer => self.n + 3,
        }
    }

    /// Ancilla whose `⟨Z⟩` yields the prediction.
    pub fn readout_qubit(&self) -> usize {
        self.total_qubits()
    }

    pub fn forward(&self, x: &StateVector) -> Result<Prediction> {
        match self.architecture {
            Architecture::SingleQp => perceptron_forward(x, &self.theta),
            Architecture::TwoLayer => {
                let (h, o) = self.theta.split_at(self.n);
                qnn2_forward(x, h, o)
            }
        }
    }

    /// Prediction estimated from `shots` measurements of the readout ancilla.
    pub fn forward_sampled(&self, x: &StateVector, shots: u64, seed: u64) -> Result<Prediction> {
        let out = run_with_ancillas(&self.circuit()?, x, self.total_qubits() - self.n, self.n)?;
        let counts = out.sample_bitstrings(shots, seed)?;
        let mask = 1usize << (self.readout_qubit() - 1);
        let zeros: u64 = counts
            .counts
            .iter()
            .filter(|(j, _)| *j & mask == 0)
            .map(|(_, c)| c)
            .sum();
        Ok(Prediction::from_value(zeros as f64 / shots as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Parity-operator expectation in `[0, 1]`.
    pub value: f64,
    pub label: u8,
}

impl Prediction {
    pub fn from_value(value: f64) -> Self {
        let value = value.clamp(0.0, 1.0);
        Prediction {
            value,
            label: threshold(value),
        }
    }
}

fn threshold(value: f64) -> u8 {
    u8::from(value >= LABEL_THRESHOLD)
}

fn run_with_ancillas(
    circuit: &Circuit,
    x: &StateVector,
    ancillas: usize,
    n: usize,
) -> Result<StateVector> {
    if x.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            actual: x.dim(),
        });
    }
    let mut state = x.with_ancillas(ancillas)?;
    circuit.apply_in_place(&mut state)?;
    Ok(state)
}

fn controlled_z(
    control: usize,
    targets: impl IntoIterator<Item = usize>,
    n_qubits: usize,
) -> Result<CircuitOp> {
    let targets: Vec<usize> = targets.into_iter().collect();
    Ok(CircuitOp::Controlled {
        control: Control::on(control),
        body: z_string(&targets, n_qubits)?,
    })
}

/// Hadamard test of `G(θ) = U†(θ) Z^{⊗n} U(θ)` with the ancilla on qubit `n+1`.
pub fn perceptron_circuit(n: usize, theta: &[f64]) -> Result<Circuit> {
    if theta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: theta.len(),
        });
    }
    let total = n + 1;
    let anc = n + 1;
    let data: Vec<usize> = (1..=n).collect();
    let u = rotation_layer(&data, theta, total)?;
    let mut c = Circuit::new(total);
    c.push(CircuitOp::H { target: anc })?;
    c.append(&u)?;
    c.push(controlled_z(anc, 1..=n, total)?)?;
    c.append(&u.inverse())?;
    c.push(CircuitOp::H { target: anc })?;
    Ok(c)
}

/// Two-layer network on `n + 3` qubits: hidden ancillas `n+1`, `n+2`
/// measure `G_1^{(h)}`, `G_2^{(h)}` coherently, then ancilla `n+3` measures
/// `G^{(o)}(θ_o)` on them.
pub fn qnn2_circuit(n: usize, theta_h: &[f64], theta_o: &[f64]) -> Result<Circuit> {
    if theta_h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: theta_h.len(),
        });
    }
    if theta_o.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: theta_o.len(),
        });
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "two-layer model needs even n >= 2, got {n}"
        )));
    }
    let total = n + 3;
    let (a, b, out) = (n + 1, n + 2, n + 3);
    let half = n / 2;
    let data: Vec<usize> = (1..=n).collect();
    let u_h = rotation_layer(&data, theta_h, total)?;
    let mut theta_anc = vec![0.0; total];
    theta_anc[a - 1] = theta_o[0];
    theta_anc[b - 1] = theta_o[1];
    let u_o = rotation_layer(&[a, b], &theta_anc, total)?;

    let mut c = Circuit::new(total);
    for q in [a, b, out] {
        c.push(CircuitOp::H { target: q })?;
    }
    c.append(&u_h)?;
    c.push(controlled_z(a, 1..=half, total)?)?;
    c.push(controlled_z(b, half + 1..=n, total)?)?;
    c.append(&u_h.inverse())?;
    c.push(CircuitOp::H { target: a })?;
    c.push(CircuitOp::H { target: b })?;
    c.append(&u_o)?;
    c.push(controlled_z(out, [a, b], total)?)?;
    c.append(&u_o.inverse())?;
    c.push(CircuitOp::H { target: out })?;
    Ok(c)
}

pub fn perceptron_forward(x: &StateVector, theta: &[f64]) -> Result<Prediction> {
    let n = x.n_qubits();
    let state = run_with_ancillas(&perceptron_circuit(n, theta)?, x, 1, n)?;
    Ok(Prediction::from_value(
        (1.0 + state.expectation_z(n + 1)?) / 2.0,
    ))
}

pub fn qnn2_forward(x: &StateVector, theta_h: &[f64], theta_o: &[f64]) -> Result<Prediction> {
    let n = x.n_qubits();
    let state = run_with_ancillas(&qnn2_circuit(n, theta_h, theta_o)?, x, 3, n)?;
    Ok(Prediction::from_value(
        (1.0 + state.expectation_z(n + 3)?) / 2.0,
    ))
}

pub fn predict_label(model: &QnnModel, x: &StateVector) -> Result<u8> {
    Ok(model.forward(x)?.label)
}

/// A normalized input state with its 0/1 label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    pub state: StateVector,
    pub label: u8,
}

/// How a feature vector becomes an input state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLoader {
    /// Write the normalized amplitudes directly.
    #[default]
    Inject,
    /// Run the exact amplitude-encoding circuit on `|0⟩`.
    ExactCircuit,
}

impl StateLoader {
    pub fn load(self, features: &[f64]) -> Result<StateVector> {
        match self {
            StateLoader::Inject => StateVector::from_real_normalized(features),
            StateLoader::ExactCircuit => {
                let x = pad_and_repair(features, DEFAULT_EPSILON)?;
                let (c, _) = build_exact_circuit(&x)?;
                apply(&c, &StateVector::zero(c.n_qubits())?)
            }
        }
    }
}

/// `C(θ) = (1/n_s) Σ_s (value_s − y_s)²`, evaluated in parallel.
pub fn cost(model: &QnnModel, samples: &[LabeledState]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let values = predict_all(model, samples)?;
    let total: f64 = values
        .iter()
        .zip(samples)
        .map(|(p, s)| (p.value - f64::from(s.label)).powi(2))
        .sum();
    Ok(total / samples.len() as f64)
}

/// Forward pass over every sample, in input order.
pub fn predict_all(model: &QnnModel, samples: &[LabeledState]) -> Result<Vec<Prediction>> {
    model.validate()?;
    let circuit = model.circuit()?;
    let ancillas = model.total_qubits() - model.n;
    let readout = model.readout_qubit();
    samples
        .par_iter()
        .map(|s| {
            if s.label > 1 {
                return Err(Error::InvalidLabel(s.label));
            }
            let state = run_with_ancillas(&circuit, &s.state, ancillas, model.n)?;
            Ok(Prediction::from_value(
                (1.0 + state.expectation_z(readout)?) / 2.0,
            ))
        })
        .collect()
}

/// Confusion table with rows `actual 1`, `actual 0` and columns
/// `predicted 1`, `predicted 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: [[u64; 2]; 2],
    /// Row-normalized percentages (a row with no samples is all zero).
    pub percent: [[f64; 2]; 2],
}

impl Confusion {
    fn from_counts(counts: [[u64; 2]; 2]) -> Self {
        let mut percent = [[0.0; 2]; 2];
        for (row, p) in counts.iter().zip(percent.iter_mut()) {
            let total = row[0] + row[1];
            if total > 0 {
                p[0] = 100.0 * row[0] as f64 / total as f64;
                p[1] = 100.0 * row[1] as f64 / total as f64;
            }
        }
        Confusion { counts, percent }
    }

    pub fn true_positive(&self) -> u64 {
        self.counts[0][0]
    }
    pub fn false_negative(&self) -> u64 {
        self.counts[0][1]
    }
    pub fn false_positive(&self) -> u64 {
        self.counts[1][0]
    }
    pub fn true_negative(&self) -> u64 {
        self.counts[1][1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub confusion: Confusion,
    /// F1 of class 1. Defined as 1 when there are neither actual nor
    /// predicted positives.
    pub f1: f64,
    pub seed: Option<u64>,
    pub correct: usize,
    pub total: usize,
}

impl Metrics {
    pub fn from_labels(actual: &[u8], predicted: &[u8], seed: Option<u64>) -> Result<Self> {
        if actual.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        if actual.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: actual.len(),
                actual: predicted.len(),
            });
        }
        let mut counts = [[0u64; 2]; 2];
        for (&y, &p) in actual.iter().zip(predicted) {
            if y > 1 {
                return Err(Error::InvalidLabel(y));
            }
            if p > 1 {
                return Err(Error::InvalidLabel(p));
            }
            counts[usize::from(1 - y)][usize::from(1 - p)] += 1;
        }
        let confusion = Confusion::from_counts(counts);
        let correct = (confusion.true_positive() + confusion.true_negative()) as usize;
        let tp = confusion.true_positive() as f64;
        let denom = 2.0 * tp + (confusion.false_positive() + confusion.false_negative()) as f64;
        let f1 = if denom == 0.0 { 1.0 } else { 2.0 * tp / denom };
        Ok(Metrics {
            accuracy: correct as f64 / actual.len() as f64,
            confusion,
            f1,
            seed,
            correct,
            total: actual.len(),
        })
    }
}

pub fn evaluate(model: &QnnModel, test: &[LabeledState]) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let predicted: Vec<u8> = predict_all(model, test)?.iter().map(|p| p.label).collect();
    let actual: Vec<u8> = test.iter().map(|s| s.label).collect();
    Metrics::from_labels(&actual, &predicted, model.training_meta.seed)
}
