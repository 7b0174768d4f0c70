//! Dense-matrix oracle shared by the integration tests. Everything here is
//! built from explicit Kronecker products, independent of the simulator's
//! pair-update kernels.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use stabenc::sim::{Circuit, CircuitOp, Unitary2};

pub type Mat = Vec<Vec<Complex64>>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> Mat {
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| c(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = vec![vec![c(0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == c(0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Mat, v: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn dagger(a: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| a[j][i].conj()).collect())
        .collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
        .collect()
}

pub fn frobenius(a: &Mat) -> f64 {
    a.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn two(u: &Unitary2) -> Mat {
    vec![u.0[0].to_vec(), u.0[1].to_vec()]
}

pub fn ry(angle: f64) -> Mat {
    let (s, co) = (angle / 2.0).sin_cos();
    vec![vec![c(co), c(-s)], vec![c(s), c(co)]]
}

pub fn pauli_z() -> Mat {
    vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(-1.0)]]
}

pub fn pauli_x() -> Mat {
    vec![vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]]
}

pub fn hadamard() -> Mat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![vec![c(h), c(h)], vec![c(h), c(-h)]]
}

pub fn projector(bit: bool) -> Mat {
    if bit {
        vec![vec![c(0.0), c(0.0)], vec![c(0.0), c(1.0)]]
    } else {
        vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(0.0)]]
    }
}

/// `I ⊗ … ⊗ m ⊗ … ⊗ I` with `m` on `qubit` (1-based, qubit 1 = least
/// significant bit, i.e. the rightmost Kronecker factor).
pub fn on_qubit(m: &Mat, qubit: usize, n: usize) -> Mat {
    kron(
        &kron(&identity(1 << (n - qubit)), m),
        &identity(1 << (qubit - 1)),
    )
}

/// Product of single-qubit factors; `factors[q-1]` acts on qubit `q`.
pub fn tensor(factors: &[Mat]) -> Mat {
    factors
        .iter()
        .rev()
        .fold(identity(1), |acc, f| kron(&acc, f))
}

/// Multi-controlled `u` as `Σ_patterns P ⊗ … ⊗ (u or I)`: the sum over all
/// control projector combinations, with `u` only on the fully matching term.
pub fn mcu(controls: &[(usize, bool)], target: usize, u: &Mat, n: usize) -> Mat {
    let dim = 1 << n;
    let mut out = vec![vec![c(0.0); dim]; dim];
    for pattern in 0..(1usize << controls.len()) {
        let mut factors: Vec<Mat> = (0..n).map(|_| identity(2)).collect();
        let mut all_match = true;
        for (k, &(q, want)) in controls.iter().enumerate() {
            let bit = pattern >> k & 1 == 1;
            factors[q - 1] = projector(bit);
            all_match &= bit == want;
        }
        if all_match {
            factors[target - 1] = u.clone();
        }
        let term = tensor(&factors);
        for i in 0..dim {
            for j in 0..dim {
                out[i][j] += term[i][j];
            }
        }
    }
    out
}

/// Dense unitary of a whole circuit.
pub fn circuit_matrix(circuit: &Circuit) -> Mat {
    let n = circuit.n_qubits();
    circuit
        .ops()
        .iter()
        .fold(identity(1 << n), |acc, op| matmul(&op_matrix(op, n), &acc))
}

pub fn op_matrix(op: &CircuitOp, n: usize) -> Mat {
    match op {
        CircuitOp::Ry { target, angle } => on_qubit(&ry(*angle), *target, n),
        CircuitOp::Z { target } => on_qubit(&pauli_z(), *target, n),
        CircuitOp::X { target } => on_qubit(&pauli_x(), *target, n),
        CircuitOp::H { target } => on_qubit(&hadamard(), *target, n),
        CircuitOp::Mcu {
            controls,
            target,
            u,
        } => {
            let cs: Vec<(usize, bool)> = controls.iter().map(|c| (c.qubit, c.value)).collect();
            mcu(&cs, *target, &two(u), n)
        }
        CircuitOp::Controlled { control, body } => {
            // P_off ⊗ I + P_on ⊗ body, with body padded to n qubits
            let mut padded = Circuit::new(n);
            padded.append(body).unwrap();
            let b = circuit_matrix(&padded);
            let on = on_qubit(&projector(control.value), control.qubit, n);
            let off = on_qubit(&projector(!control.value), control.qubit, n);
            let on_b = matmul(&on, &b);
            on_b.iter()
                .zip(&off)
                .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
                .collect()
        }
    }
}

pub fn random_real_vector<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    }
}

pub fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}
