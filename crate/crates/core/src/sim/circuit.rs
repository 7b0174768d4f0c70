use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gate::Unitary2;
use super::state::StateVector;
use crate::error::{Error, Result};

/// A control condition: the gate fires when `qubit` reads `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub value: bool,
}

impl Control {
    pub fn on(qubit: usize) -> Self {
        Control { qubit, value: true }
    }

    pub fn off(qubit: usize) -> Self {
        Control {
            qubit,
            value: false,
        }
    }
}

/// One circuit instruction. Qubits are 1-based, qubit 1 being the least
/// significant bit of the basis index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CircuitOp {
    Ry {
        target: usize,
        angle: f64,
    },
    Z {
        target: usize,
    },
    X {
        target: usize,
    },
    H {
        target: usize,
    },
    /// Multi-controlled single-qubit gate.
    Mcu {
        controls: Vec<Control>,
        target: usize,
        u: Unitary2,
    },
    /// `body` applied on the subspace where `control` holds, identity elsewhere.
    Controlled {
        control: Control,
        body: Circuit,
    },
}

impl CircuitOp {
    fn inverse(&self) -> CircuitOp {
        match self {
            CircuitOp::Ry { target, angle } => CircuitOp::Ry {
                target: *target,
                angle: -angle,
            },
            CircuitOp::Mcu {
                controls,
                target,
                u,
            } => CircuitOp::Mcu {
                controls: controls.clone(),
                target: *target,
                u: u.dagger(),
            },
            CircuitOp::Controlled { control, body } => CircuitOp::Controlled {
                control: *control,
                body: body.inverse(),
            },
            other => other.clone(),
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let check = |q: usize| {
            if q == 0 || q > n_qubits {
                Err(Error::QubitOutOfRange { qubit: q, n_qubits })
            } else {
                Ok(())
            }
        };
        match self {
            CircuitOp::Ry { target, .. }
            | CircuitOp::Z { target }
            | CircuitOp::X { target }
            | CircuitOp::H { target } => check(*target),
            CircuitOp::Mcu {
                controls,
                target,
                u,
            } => {
                check(*target)?;
                let mut seen = 1u64 << (*target - 1);
                for c in controls {
                    check(c.qubit)?;
                    let bit = 1u64 << (c.qubit - 1);
                    if seen & bit != 0 {
                        return Err(Error::DuplicateQubit(c.qubit));
                    }
                    seen |= bit;
                }
                if !u.is_unitary() {
                    return Err(Error::NonUnitary {
                        deviation: u.unitarity_deviation(),
                    });
                }
                Ok(())
            }
            CircuitOp::Controlled { control, body } => {
                check(control.qubit)?;
                if body.n_qubits > n_qubits {
                    return Err(Error::DimensionMismatch {
                        expected: n_qubits,
                        actual: body.n_qubits,
                    });
                }
                body.validate()?;
                if body.touches(control.qubit) {
                    return Err(Error::DuplicateQubit(control.qubit));
                }
                Ok(())
            }
        }
    }

    fn touches(&self, qubit: usize) -> bool {
        match self {
            CircuitOp::Ry { target, .. }
            | CircuitOp::Z { target }
            | CircuitOp::X { target }
            | CircuitOp::H { target } => *target == qubit,
            CircuitOp::Mcu {
                controls, target, ..
            } => *target == qubit || controls.iter().any(|c| c.qubit == qubit),
            CircuitOp::Controlled { control, body } => {
                control.qubit == qubit || body.touches(qubit)
            }
        }
    }

    fn gate_count(&self) -> usize {
        match self {
            CircuitOp::Controlled { body, .. } => body.gate_count(),
            _ => 1,
        }
    }
}

/// An ordered gate list on `n_qubits` qubits.
///
/// `depth_units` is a logical depth tally maintained by whoever builds the
/// circuit (exact encoding counts multi-controlled blocks; the recursive
/// scheme counts its own recursion). It is not recomputed from `ops`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<CircuitOp>,
    pub depth_units: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            ops: Vec::new(),
            depth_units: 0,
        }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::new(n_qubits)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Appends an op after validating qubit indices and unitarity.
    pub fn push(&mut self, op: CircuitOp) -> Result<&mut Self> {
        op.validate(self.n_qubits)?;
        self.ops.push(op);
        Ok(self)
    }

    /// Appends every op of `other` (which may act on fewer qubits).
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: other.n_qubits,
            });
        }
        self.ops.extend(other.ops.iter().cloned());
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.ops
            .iter()
            .try_for_each(|op| op.validate(self.n_qubits))
    }

    /// The adjoint circuit: reversed order, every op inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            ops: self.ops.iter().rev().map(CircuitOp::inverse).collect(),
            depth_units: self.depth_units,
        }
    }

    /// Number of primitive gates, looking through controlled sub-circuits.
    pub fn gate_count(&self) -> usize {
        self.ops.iter().map(CircuitOp::gate_count).sum()
    }

    fn touches(&self, qubit: usize) -> bool {
        self.ops.iter().any(|op| op.touches(qubit))
    }

    /// Applies the circuit to `state` in place. The state may be larger than
    /// the circuit; extra qubits are left untouched.
    pub fn apply_in_place(&self, state: &mut StateVector) -> Result<()> {
        if self.n_qubits > state.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: state.n_qubits(),
                actual: self.n_qubits,
            });
        }
        apply_ops(&self.ops, &ControlMask::default(), state.amplitudes_mut());
        Ok(())
    }
}

/// Returns `circuit |state⟩`. The register sizes must agree.
pub fn apply(circuit: &Circuit, state: &StateVector) -> Result<StateVector> {
    if circuit.n_qubits() != state.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: state.n_qubits(),
            actual: circuit.n_qubits(),
        });
    }
    circuit.validate()?;
    let mut out = state.clone();
    circuit.apply_in_place(&mut out)?;
    Ok(out)
}

/// Accumulated control condition: indices `i` with `i & mask == pattern`.
#[derive(Debug, Clone, Copy, Default)]
struct ControlMask {
    mask: usize,
    pattern: usize,
}

impl ControlMask {
    fn with(mut self, control: Control) -> Self {
        let bit = 1usize << (control.qubit - 1);
        self.mask |= bit;
        if control.value {
            self.pattern |= bit;
        } else {
            self.pattern &= !bit;
        }
        self
    }
}

fn apply_ops(ops: &[CircuitOp], ctrl: &ControlMask, amps: &mut [Complex64]) {
    for op in ops {
        match op {
            CircuitOp::Ry { target, angle } => {
                apply_single(amps, *target, &Unitary2::ry(*angle), ctrl)
            }
            CircuitOp::Z { target } => apply_z(amps, *target, ctrl),
            CircuitOp::X { target } => apply_single(amps, *target, &Unitary2::pauli_x(), ctrl),
            CircuitOp::H { target } => apply_single(amps, *target, &Unitary2::hadamard(), ctrl),
            CircuitOp::Mcu {
                controls,
                target,
                u,
            } => {
                let inner = controls.iter().fold(*ctrl, |m, c| m.with(*c));
                apply_single(amps, *target, u, &inner);
            }
            CircuitOp::Controlled { control, body } => {
                apply_ops(&body.ops, &ctrl.with(*control), amps);
            }
        }
    }
}

/// Calls `f(i0)` for every index with target bit 0 that satisfies the
/// control condition; `i0 | target_bit` is its partner.
fn for_each_pair(dim: usize, target_bit: usize, ctrl: &ControlMask, mut f: impl FnMut(usize)) {
    let fixed = ctrl.mask | target_bit;
    let n_free = dim.trailing_zeros() - fixed.count_ones();
    // Positions of fixed bits, ascending, for zero-bit insertion.
    let mut positions = [0u32; usize::BITS as usize];
    let mut n_pos = 0;
    let mut rest = fixed;
    while rest != 0 {
        positions[n_pos] = rest.trailing_zeros();
        rest &= rest - 1;
        n_pos += 1;
    }
    for k in 0..(1usize << n_free) {
        let mut i = k;
        for &p in &positions[..n_pos] {
            let low = i & ((1usize << p) - 1);
            i = ((i >> p) << (p + 1)) | low;
        }
        f(i | ctrl.pattern);
    }
}

fn apply_single(amps: &mut [Complex64], target: usize, u: &Unitary2, ctrl: &ControlMask) {
    let bit = 1usize << (target - 1);
    let m = &u.0;
    for_each_pair(amps.len(), bit, ctrl, |i0| {
        let i1 = i0 | bit;
        let (a0, a1) = (amps[i0], amps[i1]);
        amps[i0] = m[0][0] * a0 + m[0][1] * a1;
        amps[i1] = m[1][0] * a0 + m[1][1] * a1;
    });
}

fn apply_z(amps: &mut [Complex64], target: usize, ctrl: &ControlMask) {
    let bit = 1usize << (target - 1);
    for_each_pair(amps.len(), bit, ctrl, |i0| {
        amps[i0 | bit] = -amps[i0 | bit];
    });
}
