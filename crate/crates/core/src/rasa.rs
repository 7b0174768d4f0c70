//! Recursive approximate-scheme encoding.
//!
//! The input is cut into blocks of `2^q_in` entries; each block's two halves
//! are encoded exactly on `q_in − 1` qubits. Level by level, the two circuits
//! `(U, V)` of a block are fused into one circuit on one more qubit:
//!
//! ```text
//! Ũ = [I ⊗ U] · (|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ U_δ) · [R_y(2λ) ⊗ I]
//! ```
//!
//! where `U_δ|0⟩` approximates `U†V|0⟩` by its `q^α` dominant components,
//! rounded to `p` significant figures. The fused circuits of neighbouring
//! blocks become the `(U, V)` pair of the next level until one circuit on
//! `n` qubits remains.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{encode_amplitudes, split_angle, InputVector, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::sim::{apply, Circuit, CircuitOp, Control, StateVector};

/// Magnitudes at or below this are treated as zero in exact-amplitude mode.
/// Simulating `U†V` leaves round-off of order `1e-16` on components that are
/// zero in exact arithmetic.
pub const EXACT_NOISE_FLOOR: f64 = 1e-12;

/// How the magnitudes of `U†V|0⟩` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxMode {
    /// `|c_j| ≈ sqrt(n_j / χ)` from sampled bit strings.
    ShotSampled,
    /// `|c_j|` read from the statevector.
    ExactAmplitudes,
}

/// Number of circuit executions per approximation call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiSchedule {
    /// `χ = q^α · 10^(2p)` at level `q`.
    Rule,
    /// Same `χ` at every level.
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasaParams {
    pub alpha: u32,
    /// Significant figures kept in `|c_j|`.
    pub p: u32,
    pub q_in: usize,
    pub chi: ChiSchedule,
    pub mode: ApproxMode,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for RasaParams {
    fn default() -> Self {
        RasaParams {
            alpha: 3,
            p: 2,
            q_in: 2,
            chi: ChiSchedule::Fixed(40_000),
            mode: ApproxMode::ShotSampled,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl RasaParams {
    /// Checks the parameters against an input on `n` qubits.
    ///
    /// `q_in == n` is accepted: the recursion then reduces to one final fuse.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.alpha == 0 {
            return Err(Error::InvalidParameter("alpha must be at least 1".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidParameter("p must be at least 1".into()));
        }
        if self.q_in < 2 || self.q_in > n {
            return Err(Error::InvalidParameter(format!(
                "q_in must satisfy 2 <= q_in <= n (q_in = {}, n = {n})",
                self.q_in
            )));
        }
        if self.chi == ChiSchedule::Fixed(0) {
            return Err(Error::InvalidParameter("chi must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        Ok(())
    }

    /// Component cutoff `q^α` (saturating).
    pub fn truncation(&self, q: usize) -> usize {
        (q as u64)
            .checked_pow(self.alpha)
            .map_or(usize::MAX, |v| v.min(usize::MAX as u64) as usize)
    }

    pub fn chi_for_level(&self, q: usize) -> u64 {
        match self.chi {
            ChiSchedule::Fixed(chi) => chi,
            ChiSchedule::Rule => (q as u64)
                .checked_pow(self.alpha)
                .and_then(|t| 10u64.checked_pow(2 * self.p).and_then(|s| t.checked_mul(s)))
                .unwrap_or(u64::MAX),
        }
    }
}

/// One block of the input, split into normalized halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBlock {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub norm_upper: f64,
    pub norm_lower: f64,
}

/// Circuits for the two halves of a block plus their norms.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBlock {
    pub u: Circuit,
    pub v: Circuit,
    pub n_u: f64,
    pub n_v: f64,
}

/// Sparse approximation `|ψ_δ⟩ = Σ_k c_{j_k} |j_k⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseApproxState {
    pub n_qubits: usize,
    /// `(basis index, coefficient)`, sorted by index.
    pub components: Vec<(usize, Complex64)>,
}

impl SparseApproxState {
    /// Number of retained components.
    pub fn eta(&self) -> usize {
        self.components.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|(_, c)| c.norm_sqr()).sum()
    }

    pub fn magnitude(&self, index: usize) -> f64 {
        self.components
            .iter()
            .find(|(j, _)| *j == index)
            .map_or(0.0, |(_, c)| c.norm())
    }

    /// Dense real vector; fails on a genuinely complex coefficient.
    pub fn to_dense_real(&self) -> Result<Vec<f64>> {
        let mut dense = vec![0.0; 1 << self.n_qubits];
        for &(j, c) in &self.components {
            if c.im.abs() > 1e-12 {
                return Err(Error::ComplexAmplitude { index: j });
            }
            dense[j] = c.re;
        }
        Ok(dense)
    }
}

/// Rounds a non-negative value to `p` significant figures.
pub fn round_significant(value: f64, p: u32) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return value;
    }
    let exponent = value.abs().log10().floor() as i32;
    let scale = 10f64.powi(p as i32 - 1 - exponent);
    (value * scale).round() / scale
}

/// Deterministic per-block seed from the master seed and the block site.
pub fn block_seed(master: u64, q: usize, block: usize) -> u64 {
    let mut z = master ^ ((q as u64) << 48) ^ (block as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cuts `x` into blocks of `2^q_in` entries and normalizes both halves.
pub fn prepare_input(x: &InputVector, q_in: usize) -> Result<Vec<InputBlock>> {
    let n = x.n_qubits();
    if q_in < 2 || q_in > n {
        return Err(Error::InvalidParameter(format!(
            "q_in = {q_in} outside 2..={n}"
        )));
    }
    let half = 1usize << (q_in - 1);
    x.values()
        .chunks(2 * half)
        .enumerate()
        .map(|(b, block)| {
            let (upper, lower) = block.split_at(half);
            let norm_upper = upper.iter().map(|v| v * v).sum::<f64>().sqrt();
            let norm_lower = lower.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm_upper == 0.0 {
                return Err(Error::ZeroNormBlock {
                    start: 2 * half * b,
                    len: half,
                });
            }
            if norm_lower == 0.0 {
                return Err(Error::ZeroNormBlock {
                    start: 2 * half * b + half,
                    len: half,
                });
            }
            Ok(InputBlock {
                upper: upper.iter().map(|v| v / norm_upper).collect(),
                lower: lower.iter().map(|v| v / norm_lower).collect(),
                norm_upper,
                norm_lower,
            })
        })
        .collect()
}

/// Encodes every half-block exactly on `q_in − 1` qubits.
///
/// The depth tally of these seed circuits is `2^(q_in − 1)`, the constant
/// term of the depth recursion.
pub fn initial_unitaries(blocks: &[InputBlock], q_in: usize) -> Result<Vec<EncodedBlock>> {
    let seed_depth = 1usize << (q_in - 1);
    blocks
        .iter()
        .map(|b| {
            let mut u = encode_amplitudes(&b.upper)?;
            let mut v = encode_amplitudes(&b.lower)?;
            u.depth_units = seed_depth;
            v.depth_units = seed_depth;
            Ok(EncodedBlock {
                u,
                v,
                n_u: b.norm_upper,
                n_v: b.norm_lower,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ApproxOutcome {
    pub state: SparseApproxState,
    /// Prepares `state` from `|0⟩`; `depth_units = η`.
    pub u_delta: Circuit,
    /// Shots spent (shot mode only).
    pub chi: Option<u64>,
    /// Gates actually emitted for `u_delta`.
    pub gate_count: usize,
}

/// Approximates `U†V|0⟩` at level `q` (both circuits on `q − 1` qubits).
pub fn approx(
    u: &Circuit,
    v: &Circuit,
    params: &RasaParams,
    q: usize,
    block: usize,
) -> Result<ApproxOutcome> {
    let m = u.n_qubits();
    if v.n_qubits() != m || m + 1 != q {
        return Err(Error::DimensionMismatch {
            expected: q - 1,
            actual: v.n_qubits().max(m),
        });
    }
    let mut contrast = Circuit::new(m);
    contrast.append(v)?.append(&u.inverse())?;
    let exact = apply(&contrast, &StateVector::zero(m)?)?;
    let amps = exact.amplitudes();
    let cutoff = params.truncation(q);

    // (index, estimated |c_j|) in selection order
    let (candidates, chi): (Vec<(usize, f64)>, Option<u64>) = match params.mode {
        ApproxMode::ShotSampled => {
            let chi = params.chi_for_level(q);
            let counts = exact.sample_bitstrings(chi, block_seed(params.seed, q, block))?;
            let mut observed: Vec<(usize, u64)> = counts.counts.into_iter().collect();
            observed.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            observed.truncate(cutoff);
            let picked = observed
                .into_iter()
                .map(|(j, n)| (j, (n as f64 / chi as f64).sqrt()))
                .collect();
            (picked, Some(chi))
        }
        ApproxMode::ExactAmplitudes => {
            let mut all: Vec<(usize, f64)> = amps
                .iter()
                .enumerate()
                .map(|(j, a)| (j, a.norm()))
                .filter(|&(_, m)| m > EXACT_NOISE_FLOOR)
                .collect();
            all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            all.truncate(cutoff);
            (all, None)
        }
    };
    let observed = candidates.len();

    let mut components: Vec<(usize, Complex64)> = candidates
        .into_iter()
        .filter_map(|(j, mag)| {
            let rounded = round_significant(mag, params.p);
            if rounded == 0.0 {
                return None;
            }
            // Phase from the exact statevector.
            let a = amps[j];
            let phase = if a.norm() > 0.0 {
                a / a.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            Some((j, phase * rounded))
        })
        .collect();
    if components.is_empty() {
        return Err(Error::NoSurvivingComponents {
            level: q,
            block,
            observed,
        });
    }
    let norm = components
        .iter()
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    for (_, c) in components.iter_mut() {
        *c /= norm;
    }
    components.sort_by_key(|(j, _)| *j);
    let state = SparseApproxState {
        n_qubits: m,
        components,
    };

    let mut u_delta = encode_amplitudes(&state.to_dense_real()?)?;
    let gate_count = u_delta.gate_count();
    u_delta.depth_units = state.eta();
    Ok(ApproxOutcome {
        state,
        u_delta,
        chi,
        gate_count,
    })
}

#[derive(Debug, Clone)]
pub struct FuseOutcome {
    /// Circuit on `q` qubits.
    pub circuit: Circuit,
    /// `sqrt(n_u² + n_v²)`
    pub norm: f64,
    pub approx: ApproxOutcome,
}

/// Fuses the two halves of `block` into one circuit on `q` qubits.
pub fn fuse(
    block: &EncodedBlock,
    params: &RasaParams,
    q: usize,
    index: usize,
) -> Result<FuseOutcome> {
    if block.n_u == 0.0 && block.n_v == 0.0 {
        return Err(Error::DegenerateFuse {
            level: q,
            block: index,
        });
    }
    let lambda = split_angle(block.n_u, block.n_v);
    let approx = approx(&block.u, &block.v, params, q, index)?;

    let mut circuit = Circuit::new(q);
    circuit.push(CircuitOp::Ry {
        target: q,
        angle: 2.0 * lambda,
    })?;
    if !approx.u_delta.is_empty() {
        circuit.push(CircuitOp::Controlled {
            control: Control::on(q),
            body: approx.u_delta.clone(),
        })?;
    }
    circuit.append(&block.u)?;
    circuit.depth_units = 1 + approx.state.eta() + block.u.depth_units;
    Ok(FuseOutcome {
        circuit,
        norm: block.n_u.hypot(block.n_v),
        approx,
    })
}

/// Per-level summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub q: usize,
    /// Largest `η` among the level's fuses.
    pub eta: usize,
    pub eta_mean: f64,
    /// Shots per approximation call; `None` in exact-amplitude mode.
    pub chi: Option<u64>,
    /// Largest `depth_units` among the circuits produced at this level.
    pub depth_measured: usize,
    pub fuses: usize,
    /// Largest gate count among the level's `U_δ` circuits.
    pub u_delta_gates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub n: usize,
    pub q_in: usize,
    pub alpha: u32,
    pub levels: Vec<LevelReport>,
    pub approx_depth_formula: usize,
    pub approx_depth_saturated: usize,
    pub exact_depth_formula: usize,
    pub crossover_q: Option<usize>,
    pub final_depth_measured: usize,
}

/// Closed-form depth estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthFormulas {
    /// `(n − q_in + 1) + Σ_{q=q_in}^{n} q^α + 2^(q_in−1)`
    pub approx_depth: usize,
    /// Same with `q^α` capped at `2^(q−1)`, the most components a
    /// `(q−1)`-qubit state can have.
    pub approx_depth_saturated: usize,
    /// `(n − q_in + 1) + Σ_{q=q_in}^{n} 2^(q−1) + 2^(q_in−1)`
    pub exact_depth: usize,
    /// Largest `q ≥ q_in` such that `q'^α ≥ 2^(q'−1)` for every
    /// `q' ∈ [q_in, q]`: up to this scale truncation loses nothing.
    pub crossover_q: Option<usize>,
    /// Formula evaluated with the observed `η` per level, when supplied.
    pub observed_depth: Option<usize>,
}

fn pow_sat(base: usize, exp: u32) -> usize {
    (base as u64)
        .checked_pow(exp)
        .map_or(usize::MAX, |v| v.min(usize::MAX as u64) as usize)
}

/// Evaluates the depth formulas. `eta_per_level`, if non-empty, lists the
/// `η` of levels `q_in ..= n` in order.
pub fn depth_report(n: usize, q_in: usize, alpha: u32, eta_per_level: &[usize]) -> DepthFormulas {
    let levels = q_in..=n;
    let rotations = n + 1 - q_in;
    let seed = 1usize << (q_in - 1);
    let approx_sum = levels
        .clone()
        .fold(0usize, |acc, q| acc.saturating_add(pow_sat(q, alpha)));
    let saturated_sum = levels
        .clone()
        .map(|q| pow_sat(q, alpha).min(1 << (q - 1)))
        .sum::<usize>();
    let exact_sum = levels.clone().map(|q| 1usize << (q - 1)).sum::<usize>();
    let crossover_q = levels
        .take_while(|&q| pow_sat(q, alpha) >= 1 << (q - 1))
        .last();
    let observed_depth = (eta_per_level.len() == rotations)
        .then(|| rotations + eta_per_level.iter().sum::<usize>() + seed);
    DepthFormulas {
        approx_depth: rotations.saturating_add(approx_sum).saturating_add(seed),
        approx_depth_saturated: rotations + saturated_sum + seed,
        exact_depth: rotations + exact_sum + seed,
        crossover_q,
        observed_depth,
    }
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RasaOutput {
    /// Circuit on `n` qubits with `x_k ≈ norm · ⟨k|U|0⟩`.
    pub circuit: Circuit,
    pub norm: f64,
    pub report: DepthReport,
}

impl RasaOutput {
    pub fn state(&self) -> Result<StateVector> {
        apply(&self.circuit, &StateVector::zero(self.circuit.n_qubits())?)
    }

    /// `x̂_k = N · Re⟨k|U|0⟩`
    pub fn reconstruct(&self) -> Result<Vec<f64>> {
        Ok(self
            .state()?
            .amplitudes()
            .iter()
            .map(|a| a.re * self.norm)
            .collect())
    }
}

struct LevelAccumulator {
    q: usize,
    etas: Vec<usize>,
    depths: Vec<usize>,
    gates: Vec<usize>,
    chi: Option<u64>,
}

impl LevelAccumulator {
    fn new(q: usize) -> Self {
        LevelAccumulator {
            q,
            etas: vec![],
            depths: vec![],
            gates: vec![],
            chi: None,
        }
    }

    fn record(&mut self, f: &FuseOutcome) {
        self.etas.push(f.approx.state.eta());
        self.depths.push(f.circuit.depth_units);
        self.gates.push(f.approx.gate_count);
        self.chi = f.approx.chi;
    }

    fn finish(self) -> LevelReport {
        let fuses = self.etas.len();
        LevelReport {
            q: self.q,
            eta: self.etas.iter().copied().max().unwrap_or(0),
            eta_mean: self.etas.iter().sum::<usize>() as f64 / fuses.max(1) as f64,
            chi: self.chi,
            depth_measured: self.depths.iter().copied().max().unwrap_or(0),
            fuses,
            u_delta_gates: self.gates.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Runs the full recursion on `x`.
///
/// Fuses within one level are independent and run in parallel on the
/// current rayon pool; per-block seeds keep the result deterministic.
pub fn run_rasa(x: &InputVector, params: &RasaParams) -> Result<RasaOutput> {
    let n = x.n_qubits();
    params.validate(n)?;
    let blocks = prepare_input(x, params.q_in)?;
    let mut stage = initial_unitaries(&blocks, params.q_in)?;
    let mut levels = Vec::with_capacity(n + 1 - params.q_in);

    for q in params.q_in..n {
        let fused: Vec<(FuseOutcome, FuseOutcome)> = stage
            .par_chunks(2)
            .enumerate()
            .map(|(bp, pair)| {
                let upper = fuse(&pair[0], params, q, 2 * bp)?;
                let lower = fuse(&pair[1], params, q, 2 * bp + 1)?;
                Ok((upper, lower))
            })
            .collect::<Result<_>>()?;
        let mut acc = LevelAccumulator::new(q);
        stage = fused
            .into_iter()
            .map(|(upper, lower)| {
                acc.record(&upper);
                acc.record(&lower);
                EncodedBlock {
                    u: upper.circuit,
                    v: lower.circuit,
                    n_u: upper.norm,
                    n_v: lower.norm,
                }
            })
            .collect();
        levels.push(acc.finish());
    }

    let last = fuse(&stage[0], params, n, 0)?;
    let mut acc = LevelAccumulator::new(n);
    acc.record(&last);
    levels.push(acc.finish());

    let formulas = depth_report(n, params.q_in, params.alpha, &[]);
    let report = DepthReport {
        n,
        q_in: params.q_in,
        alpha: params.alpha,
        levels,
        approx_depth_formula: formulas.approx_depth,
        approx_depth_saturated: formulas.approx_depth_saturated,
        exact_depth_formula: formulas.exact_depth,
        crossover_q: formulas.crossover_q,
        final_depth_measured: last.circuit.depth_units,
    };
    Ok(RasaOutput {
        circuit: last.circuit,
        norm: last.norm,
        report,
    })
}
