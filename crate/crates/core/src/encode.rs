//! Exact amplitude encoding of real vectors.
//!
//! A vector of length `2^n` is split recursively into upper/lower halves.
//! Each split on qubit `q` is a rotation `R_y(2λ)` with
//! `cos λ = N_u / sqrt(N_u² + N_d²)`, controlled on the qubits above `q`
//! selecting the segment. The final level prepares each length-2 block
//! `(x, x')` with `Z^α R_y(2β)`, where `β ∈ [0, π]` carries `|x'|` and
//! `α = 1` restores a negative `x'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Circuit, CircuitOp, Control, Unitary2};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// A real input padded to a power-of-two length, with no all-zero
/// length-2 block. Only constructed through [`pad_and_repair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputVector {
    values: Vec<f64>,
    n_qubits: usize,
    epsilon: f64,
    original_len: usize,
    /// Indices whose value was appended or overwritten with `epsilon`.
    modified: Vec<usize>,
}

impl InputVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    pub fn modified_indices(&self) -> &[usize] {
        &self.modified
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Pads `raw` with `epsilon` up to the next power of two (at least 2) and
/// replaces every all-zero length-2 block by `[epsilon, epsilon]`.
///
/// The repair is lossy: reconstructing a repaired entry yields `epsilon`.
pub fn pad_and_repair(raw: &[f64], epsilon: f64) -> Result<InputVector> {
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if let Some(bad) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "input contains non-finite value {bad}"
        )));
    }
    let len = raw.len().next_power_of_two().max(2);
    let mut values = raw.to_vec();
    let mut modified: Vec<usize> = (raw.len()..len).collect();
    values.resize(len, epsilon);
    for b in 0..len / 2 {
        let (i, j) = (2 * b, 2 * b + 1);
        if values[i] == 0.0 && values[j] == 0.0 {
            values[i] = epsilon;
            values[j] = epsilon;
            modified.extend([i, j]);
        }
    }
    modified.sort_unstable();
    Ok(InputVector {
        n_qubits: len.trailing_zeros() as usize,
        values,
        epsilon,
        original_len: raw.len(),
        modified,
    })
}

/// Invertible element-wise map applied to data before encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputMap {
    Identity,
    /// `f(x) = 1 / (1 + exp(-gain·x))`
    Sigmoid {
        gain: f64,
    },
}

impl InputMap {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            InputMap::Identity => x,
            InputMap::Sigmoid { gain } => 1.0 / (1.0 + (-gain * x).exp()),
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        match *self {
            InputMap::Identity => y,
            InputMap::Sigmoid { gain } => (y / (1.0 - y)).ln() / gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedInput {
    pub values: Vec<f64>,
    pub map: InputMap,
}

impl AdjustedInput {
    /// Maps encoded values back to the original data range.
    pub fn restore(&self, encoded: &[f64]) -> Vec<f64> {
        encoded.iter().map(|&y| self.map.invert(y)).collect()
    }
}

/// Applies `map` element-wise. An all-zero input stays all-zero under the
/// identity map, so callers must still run [`pad_and_repair`] afterwards.
pub fn adjust_input(raw: &[f64], map: InputMap) -> AdjustedInput {
    AdjustedInput {
        values: raw.iter().map(|&x| map.apply(x)).collect(),
        map,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafAngle {
    /// `R_y(2β)|0⟩ = cos β|0⟩ + sin β|1⟩`, `β ∈ [0, π]`.
    pub beta: f64,
    /// Apply `Z` after the rotation.
    pub alpha: bool,
}

impl LeafAngle {
    fn for_pair(x: f64, x_next: f64) -> Self {
        LeafAngle {
            beta: x_next.abs().atan2(x),
            alpha: x_next < 0.0,
        }
    }

    pub fn unitary(&self) -> Unitary2 {
        let rot = Unitary2::ry(2.0 * self.beta);
        if self.alpha {
            Unitary2::pauli_z() * rot
        } else {
            rot
        }
    }
}

/// Rotation angles of the exact encoding circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleTree {
    pub n_qubits: usize,
    /// `splits[k]` holds the λ angles on qubit `n - k`, one per segment of
    /// length `2^(n-k)`, for `k = 0 .. n-1` (qubit `n` down to qubit 2).
    pub splits: Vec<Vec<f64>>,
    /// One entry per length-2 block, acting on qubit 1.
    pub leaves: Vec<LeafAngle>,
}

impl AngleTree {
    /// λ angles of the split performed on `qubit` (2 ..= n).
    pub fn lambdas(&self, qubit: usize) -> &[f64] {
        &self.splits[self.n_qubits - qubit]
    }
}

/// Squared norms of all aligned segments: `sq[k][b]` covers
/// `values[b·2^k .. (b+1)·2^k]`.
fn segment_norms_sqr(values: &[f64]) -> Vec<Vec<f64>> {
    let mut levels = vec![values.iter().map(|v| v * v).collect::<Vec<_>>()];
    while levels.last().map_or(0, Vec::len) > 1 {
        let prev = levels.last().unwrap();
        levels.push(prev.chunks(2).map(|c| c[0] + c[1]).collect());
    }
    levels
}

/// `λ` with `cos λ = N_u / sqrt(N_u² + N_d²)`, in `[0, π/2]`.
///
/// Evaluated as `atan2(N_d, N_u)`, which equals the clamped arccos form but
/// keeps full precision when one of the norms is tiny.
pub fn split_angle(norm_upper: f64, norm_lower: f64) -> f64 {
    norm_lower.atan2(norm_upper)
}

pub fn compute_angles(x: &InputVector) -> Result<AngleTree> {
    angles_of(&x.values)
}

fn angles_of(values: &[f64]) -> Result<AngleTree> {
    let n = values.len().trailing_zeros() as usize;
    let sq = segment_norms_sqr(values);
    for (b, &s) in sq[1].iter().enumerate() {
        if s == 0.0 {
            return Err(Error::ZeroNormBlock {
                start: 2 * b,
                len: 2,
            });
        }
    }
    let splits = (0..n.saturating_sub(1))
        .map(|k| {
            let qubit = n - k;
            sq[qubit - 1]
                .chunks(2)
                .map(|c| split_angle(c[0].sqrt(), c[1].sqrt()))
                .collect()
        })
        .collect();
    let leaves = values
        .chunks(2)
        .map(|c| LeafAngle::for_pair(c[0], c[1]))
        .collect();
    Ok(AngleTree {
        n_qubits: n,
        splits,
        leaves,
    })
}

/// Controls selecting segment `index` on the qubits above `qubit`.
fn segment_controls(qubit: usize, n: usize, index: usize) -> Vec<Control> {
    (qubit + 1..=n)
        .map(|c| Control {
            qubit: c,
            value: (index >> (c - qubit - 1)) & 1 == 1,
        })
        .collect()
}

fn node_op(qubit: usize, n: usize, index: usize, u: Unitary2) -> CircuitOp {
    CircuitOp::Mcu {
        controls: segment_controls(qubit, n, index),
        target: qubit,
        u,
    }
}

/// Builds the full exact encoding circuit for `x`, returning it together
/// with `N = ‖x‖₂`, so that `x_k = N · ⟨k|U|0⟩`.
///
/// Every split and leaf is emitted as one multi-controlled block, so
/// `depth_units = 2^n − 1`.
pub fn build_exact_circuit(x: &InputVector) -> Result<(Circuit, f64)> {
    let tree = compute_angles(x)?;
    let circuit = circuit_from_angles(&tree)?;
    Ok((circuit, x.norm()))
}

pub fn circuit_from_angles(tree: &AngleTree) -> Result<Circuit> {
    let n = tree.n_qubits;
    let mut circuit = Circuit::new(n);
    for (k, lambdas) in tree.splits.iter().enumerate() {
        let qubit = n - k;
        for (b, &lambda) in lambdas.iter().enumerate() {
            circuit.push(node_op(qubit, n, b, Unitary2::ry(2.0 * lambda)))?;
        }
    }
    for (b, leaf) in tree.leaves.iter().enumerate() {
        circuit.push(node_op(1, n, b, leaf.unitary()))?;
    }
    circuit.depth_units = circuit.ops().len();
    Ok(circuit)
}

/// Encodes an arbitrary nonzero real vector (length `2^m`, `m ≥ 1`) as a
/// circuit preparing `values / ‖values‖`.
///
/// Unlike [`build_exact_circuit`], zero-norm segments are allowed: their
/// subtrees are skipped and gates that act as the identity are dropped, so a
/// vector with `η` nonzero entries costs at most `η·m` multi-controlled
/// gates. `depth_units` is set to the number of emitted gates.
pub fn encode_amplitudes(values: &[f64]) -> Result<Circuit> {
    if values.len() < 2 || !values.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(values.len()));
    }
    let n = values.len().trailing_zeros() as usize;
    let sq = segment_norms_sqr(values);
    if sq[n][0] == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut circuit = Circuit::new(n);
    // Walk the tree top-down, skipping zero-norm subtrees.
    let mut frontier = vec![0usize];
    for qubit in (2..=n).rev() {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for &b in &frontier {
            let upper = sq[qubit - 1][2 * b];
            let lower = sq[qubit - 1][2 * b + 1];
            if lower > 0.0 {
                let lambda = split_angle(upper.sqrt(), lower.sqrt());
                circuit.push(node_op(qubit, n, b, Unitary2::ry(2.0 * lambda)))?;
                next.push(2 * b + 1);
            }
            if upper > 0.0 {
                next.push(2 * b);
            }
        }
        next.sort_unstable();
        frontier = next;
    }
    for &b in &frontier {
        let leaf = LeafAngle::for_pair(values[2 * b], values[2 * b + 1]);
        if leaf.beta != 0.0 || leaf.alpha {
            circuit.push(node_op(1, n, b, leaf.unitary()))?;
        }
    }
    circuit.depth_units = circuit.ops().len();
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{apply, StateVector};
    use std::f64::consts::FRAC_PI_4;

    fn prepared(c: &Circuit) -> Vec<f64> {
        apply(c, &StateVector::zero(c.n_qubits()).unwrap())
            .unwrap()
            .real_parts()
    }

    #[test]
    fn padding_appends_epsilon() {
        let x = pad_and_repair(&[0.3, 0.5, 0.7], 1e-6).unwrap();
        assert_eq!(x.values(), &[0.3, 0.5, 0.7, 1e-6]);
        assert_eq!(x.n_qubits(), 2);
        assert_eq!(x.modified_indices(), &[3]);
    }

    #[test]
    fn power_of_two_input_unchanged() {
        let x = pad_and_repair(&[1.0, 2.0, 3.0, 4.0], 1e-6).unwrap();
        assert_eq!(x.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(x.modified_indices().is_empty());
    }

    #[test]
    fn zero_block_repaired() {
        let x = pad_and_repair(&[0.0, 0.0, 1.0, 1.0], 1e-6).unwrap();
        assert_eq!(x.values(), &[1e-6, 1e-6, 1.0, 1.0]);
        assert_eq!(x.modified_indices(), &[0, 1]);
        // A single zero next to a nonzero entry is left alone.
        let y = pad_and_repair(&[0.0, 2.0], 1e-6).unwrap();
        assert_eq!(y.values(), &[0.0, 2.0]);
    }

    #[test]
    fn repair_errors() {
        assert!(matches!(pad_and_repair(&[], 1e-6), Err(Error::EmptyInput)));
        assert!(matches!(
            pad_and_repair(&[1.0], 0.0),
            Err(Error::InvalidEpsilon(_))
        ));
        assert!(pad_and_repair(&[f64::NAN, 1.0], 1e-6).is_err());
        let single = pad_and_repair(&[5.0], 1e-6).unwrap();
        assert_eq!(single.values(), &[5.0, 1e-6]);
    }

    #[test]
    fn adjust_input_maps() {
        let id = adjust_input(&[1.0, -2.0], InputMap::Identity);
        assert_eq!(id.values, vec![1.0, -2.0]);
        let sig = adjust_input(&[0.0, 1.5], InputMap::Sigmoid { gain: 1.0 });
        assert!((sig.values[0] - 0.5).abs() < 1e-15);
        let back = sig.restore(&sig.values);
        assert!(back[0].abs() < 1e-12 && (back[1] - 1.5).abs() < 1e-12);
        let zeros = adjust_input(&[0.0, 0.0], InputMap::Identity);
        assert!(compute_angles(&pad_and_repair(&zeros.values, 1e-6).unwrap()).is_ok());
    }

    #[test]
    fn uniform_input_splits_at_quarter_pi() {
        let x = pad_and_repair(&[1.0; 4], 1e-6).unwrap();
        let t = compute_angles(&x).unwrap();
        assert!((t.lambdas(2)[0] - FRAC_PI_4).abs() < 1e-15);
        let (c, norm) = build_exact_circuit(&x).unwrap();
        assert!((norm - 2.0).abs() < 1e-15);
        for a in prepared(&c) {
            assert!((a - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn near_basis_input_top_angle() {
        let eps = 1e-6;
        let x = pad_and_repair(&[1.0, 0.0, 0.0, 0.0], eps).unwrap();
        assert_eq!(x.values(), &[1.0, 0.0, eps, eps]);
        // Only the [0,0] block is repaired; [1,0] has nonzero norm.
        let t = compute_angles(&x).unwrap();
        // acos loses about half the digits this close to 1
        let expected = (1.0f64 / (1.0 + 2.0 * eps * eps).sqrt()).acos();
        assert!((t.lambdas(2)[0] - expected).abs() < 1e-9);
        assert!((t.lambdas(2)[0] - (2f64.sqrt() * eps).atan()).abs() < 1e-20);
    }

    #[test]
    fn leaf_pair_three_four() {
        let x = pad_and_repair(&[3.0, 4.0], 1e-6).unwrap();
        let (c, norm) = build_exact_circuit(&x).unwrap();
        let a = prepared(&c);
        assert!((a[0] - 0.6).abs() < 1e-15 && (a[1] - 0.8).abs() < 1e-15);
        assert_eq!(norm, 5.0);
    }

    #[test]
    fn signs_use_z_branch() {
        for (x, y) in [
            (3.0, -4.0),
            (-3.0, -4.0),
            (-3.0, 4.0),
            (0.0, -1.0),
            (-1.0, 0.0),
        ] {
            let leaf = LeafAngle::for_pair(x, y);
            assert_eq!(leaf.alpha, y < 0.0);
            assert!((0.0..=std::f64::consts::PI).contains(&leaf.beta));
            let v = pad_and_repair(&[x, y], 1e-6).unwrap();
            let (c, n) = build_exact_circuit(&v).unwrap();
            let a = prepared(&c);
            assert!(
                (a[0] * n - x).abs() < 1e-12 && (a[1] * n - y).abs() < 1e-12,
                "{x},{y}"
            );
        }
    }

    #[test]
    fn ramp_round_trip() {
        let raw: Vec<f64> = (1..=8).map(f64::from).collect();
        let x = pad_and_repair(&raw, 1e-6).unwrap();
        let (c, n) = build_exact_circuit(&x).unwrap();
        assert_eq!(c.depth_units, 7);
        for (k, a) in prepared(&c).iter().enumerate() {
            assert!((a * n - raw[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn sparse_encoding_of_basis_state_is_empty() {
        let c = encode_amplitudes(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(c.is_empty());
        let c = encode_amplitudes(&[-1.0, 0.0]).unwrap();
        let a = prepared(&c);
        assert!((a[0] + 1.0).abs() < 1e-15 && a[1].abs() < 1e-15);
    }

    #[test]
    fn sparse_encoding_matches_target() {
        let mut v = vec![0.0; 16];
        v[3] = 0.5;
        v[9] = -0.7;
        v[14] = 0.2;
        let c = encode_amplitudes(&v).unwrap();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (k, a) in prepared(&c).iter().enumerate() {
            assert!((a * norm - v[k]).abs() < 1e-12);
        }
        assert!(c.ops().len() <= 3 * 4);
        assert!(matches!(encode_amplitudes(&[0.0; 4]), Err(Error::ZeroNorm)));
    }
}
