use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on register size: 2^20 amplitudes, 16 MiB of `Complex64`.
pub const DEFAULT_MAX_QUBITS: usize = 20;

/// Tolerance on `Σ|a_j|² = 1` accepted by [`StateVector::from_amplitudes`].
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Dense n-qubit state.
///
/// Basis index `j` encodes the bit string `j_n … j_1`; qubit 1 is the least
/// significant bit, qubit `n` the most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

/// Measurement record: basis index -> number of times it was observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub shots: u64,
    pub counts: BTreeMap<usize, u64>,
}

impl ShotCounts {
    pub fn get(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }
}

pub(crate) fn check_qubit_count(n_qubits: usize, limit: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter(
            "a register needs at least one qubit".into(),
        ));
    }
    if n_qubits > limit {
        return Err(Error::TooManyQubits {
            requested: n_qubits,
            limit,
        });
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::zero_bounded(n_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn zero_bounded(n_qubits: usize, max_qubits: usize) -> Result<Self> {
        Self::basis_bounded(n_qubits, 0, max_qubits)
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        Self::basis_bounded(n_qubits, index, DEFAULT_MAX_QUBITS)
    }

    fn basis_bounded(n_qubits: usize, index: usize, max_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits, max_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: index + 1,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps an already normalized amplitude vector.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        check_qubit_count(n_qubits, DEFAULT_MAX_QUBITS)?;
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "amplitudes are not normalized (sum of squares {norm_sqr})"
            )));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Builds `x / ‖x‖` from a real vector whose length is a power of two.
    pub fn from_real_normalized(values: &[f64]) -> Result<Self> {
        let n_qubits = qubits_for_len(values.len())?;
        check_qubit_count(n_qubits, DEFAULT_MAX_QUBITS)?;
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let amplitudes = values
            .iter()
            .map(|v| Complex64::new(v / norm, 0.0))
            .collect();
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Real parts of the amplitudes.
    pub fn real_parts(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.re).collect()
    }

    /// `|self⟩ ⊗ |0…0⟩_extra` with the new qubits placed above the existing
    /// ones (indices `n+1 ..= n+extra`).
    pub fn with_ancillas(&self, extra: usize) -> Result<Self> {
        let n_qubits = self.n_qubits + extra;
        check_qubit_count(n_qubits, DEFAULT_MAX_QUBITS)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[..self.amplitudes.len()].copy_from_slice(&self.amplitudes);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit == 0 || qubit > self.n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// `⟨Z_qubit⟩ = Σ_j |a_j|² (−1)^{bit(qubit, j)}`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = 1usize << (qubit - 1);
        let value = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| {
                if j & mask == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum::<f64>();
        Ok(value.clamp(-1.0, 1.0))
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr())
    }

    /// Draws `shots` computational-basis measurements.
    ///
    /// The counts are drawn as a multinomial through a chain of conditional
    /// binomials, which has the same distribution as `shots` independent
    /// draws but costs O(2^n) instead of O(shots).
    pub fn sample_bitstrings(&self, shots: u64, seed: u64) -> Result<ShotCounts> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs = self.probabilities();
        let mut remaining_mass: f64 = probs.iter().sum();
        let mut remaining_shots = shots;
        let mut counts = BTreeMap::new();
        for (j, &p) in probs.iter().enumerate() {
            if remaining_shots == 0 {
                break;
            }
            if p <= 0.0 {
                continue;
            }
            let conditional = if remaining_mass > 0.0 {
                (p / remaining_mass).min(1.0)
            } else {
                1.0
            };
            let drawn = if conditional >= 1.0 {
                remaining_shots
            } else {
                Binomial::new(remaining_shots, conditional)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?
                    .sample(&mut rng)
            };
            if drawn > 0 {
                counts.insert(j, drawn);
            }
            remaining_shots -= drawn;
            remaining_mass -= p;
        }
        if remaining_shots > 0 {
            // Rounding left mass unassigned; give it to the most likely outcome.
            let top = probs
                .iter()
                .enumerate()
                .fold(
                    (0, f64::MIN),
                    |best, (j, &p)| if p > best.1 { (j, p) } else { best },
                )
                .0;
            *counts.entry(top).or_insert(0) += remaining_shots;
        }
        Ok(ShotCounts { shots, counts })
    }
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}
