//! Dense state-vector simulation of up to three `d`-level registers.
//!
//! Basis index encoding: the first register in the layout is the most
//! significant digit in base `d`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldElement;

/// Amplitude drift allowed after a gate.
pub const GATE_NORM_TOLERANCE: f64 = 1e-9;
/// Norm deviation above which a measurement is refused.
pub const MEASURE_NORM_TOLERANCE: f64 = 1e-6;
pub const MAX_DIMENSION: usize = 1024;
pub const MAX_REGISTERS: usize = 3;
/// Upper bound on the state vector length.
pub const MAX_STATE_LEN: usize = 1 << 21;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuditError {
    #[error("register dimension {0} is outside 2..={MAX_DIMENSION}")]
    BadDimension(usize),
    #[error("a layout holds between 1 and {MAX_REGISTERS} distinct registers")]
    BadRegisterSet,
    #[error("state vector of length {0} exceeds the simulator limit")]
    StateTooLarge(usize),
    #[error("value {value} is out of range for a {d}-level register")]
    ValueOutOfRange { value: usize, d: usize },
    #[error("expected {expected} register values, got {got}")]
    WrongValueCount { expected: usize, got: usize },
    #[error("register {0} is not part of this layout")]
    UnknownRegister(Register),
    #[error("control and target are the same register ({0})")]
    SameRegister(Register),
    #[error("phase uses modulus {got} on a {d}-level register")]
    ModulusMismatch { got: u64, d: usize },
    #[error("state norm {0} is not 1")]
    NotNormalized(f64),
}

/// Register labels used by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Register {
    /// The reconstructor's home register, never transmitted.
    #[serde(rename = "H")]
    Home,
    /// The ancillary register passed around the ring.
    #[serde(rename = "T")]
    Transmitted,
    /// An eavesdropper's private probe register.
    #[serde(rename = "A")]
    Adversary,
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Register::Home => "H",
            Register::Transmitted => "T",
            Register::Adversary => "A",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    d: usize,
    registers: Vec<Register>,
}

impl RegisterLayout {
    pub fn new(d: usize, registers: &[Register]) -> Result<Self, QuditError> {
        if !(2..=MAX_DIMENSION).contains(&d) {
            return Err(QuditError::BadDimension(d));
        }
        if registers.is_empty() || registers.len() > MAX_REGISTERS {
            return Err(QuditError::BadRegisterSet);
        }
        for (i, r) in registers.iter().enumerate() {
            if registers[..i].contains(r) {
                return Err(QuditError::BadRegisterSet);
            }
        }
        let len = (0..registers.len())
            .try_fold(1usize, |acc, _| acc.checked_mul(d))
            .filter(|&len| len <= MAX_STATE_LEN)
            .ok_or(QuditError::StateTooLarge(d.saturating_pow(registers.len() as u32)))?;
        debug_assert!(len >= d);
        Ok(RegisterLayout {
            d,
            registers: registers.to_vec(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    /// Width in qubits of the binary encoding of one register, `ceil(log2 d)`.
    pub fn qubit_width(&self) -> u32 {
        qubit_width(self.d)
    }

    pub fn len(&self) -> usize {
        self.d.pow(self.registers.len() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn position(&self, register: Register) -> Result<usize, QuditError> {
        self.registers
            .iter()
            .position(|&r| r == register)
            .ok_or(QuditError::UnknownRegister(register))
    }

    /// Place value of a register's digit in the flat index.
    fn stride(&self, register: Register) -> Result<usize, QuditError> {
        let pos = self.position(register)?;
        Ok(self.d.pow((self.registers.len() - 1 - pos) as u32))
    }
}

/// `ceil(log2 d)` for `d >= 2`.
pub fn qubit_width(d: usize) -> u32 {
    usize::BITS - (d - 1).leading_zeros()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuditState {
    layout: RegisterLayout,
    amplitudes: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub register: Register,
    pub value: usize,
    pub post_state: QuditState,
}

impl QuditState {
    /// Computational basis state with one value per register, in layout order.
    pub fn basis_state(layout: RegisterLayout, values: &[usize]) -> Result<Self, QuditError> {
        if values.len() != layout.registers.len() {
            return Err(QuditError::WrongValueCount {
                expected: layout.registers.len(),
                got: values.len(),
            });
        }
        let d = layout.d;
        let mut index = 0;
        for &v in values {
            if v >= d {
                return Err(QuditError::ValueOutOfRange { value: v, d });
            }
            index = index * d + v;
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.len()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(QuditState { layout, amplitudes })
    }

    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(layout: RegisterLayout, amplitudes: Vec<Complex64>) -> Result<Self, QuditError> {
        if amplitudes.len() != layout.len() {
            return Err(QuditError::WrongValueCount {
                expected: layout.len(),
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(QuditError::NotNormalized(norm));
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        Ok(QuditState { layout, amplitudes })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Euclidean distance between two amplitude vectors of the same layout.
    pub fn distance(&self, other: &QuditState) -> f64 {
        assert_eq!(self.layout, other.layout, "layouts differ");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn amplitude(&self, values: &[usize]) -> Complex64 {
        let index = values.iter().fold(0, |acc, &v| acc * self.layout.d + v);
        self.amplitudes[index]
    }

    fn check_norm(&self) {
        let drift = (self.norm() - 1.0).abs();
        assert!(
            drift <= GATE_NORM_TOLERANCE,
            "gate broke normalization (drift {drift:e})"
        );
    }

    /// Applies a `d x d` matrix (row-major) to one register.
    fn apply_single(&mut self, register: Register, matrix: &[Complex64]) -> Result<(), QuditError> {
        let d = self.layout.d;
        let stride = self.layout.stride(register)?;
        let block = stride * d;
        let mut column = vec![Complex64::new(0.0, 0.0); d];
        for outer in (0..self.amplitudes.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (s, slot) in column.iter_mut().enumerate() {
                    *slot = self.amplitudes[base + s * stride];
                }
                for q in 0..d {
                    let row = &matrix[q * d..(q + 1) * d];
                    self.amplitudes[base + q * stride] = row.iter().zip(&column).map(|(m, a)| m * a).sum();
                }
            }
        }
        self.check_norm();
        Ok(())
    }

    /// `|s> -> d^{-1/2} sum_q e^{2 pi i s q / d} |q>` on one register.
    pub fn apply_qft(&mut self, register: Register) -> Result<(), QuditError> {
        let m = fourier_matrix(self.layout.d, 1.0);
        self.apply_single(register, &m)
    }

    /// Conjugate transpose of [`QuditState::apply_qft`].
    pub fn apply_iqft(&mut self, register: Register) -> Result<(), QuditError> {
        let m = fourier_matrix(self.layout.d, -1.0);
        self.apply_single(register, &m)
    }

    /// Generalized CNOT: `|a>|b> -> |a>|a xor b>` on the binary encodings.
    ///
    /// When `d` is not a power of two, `a xor b` can leave `0..d`; those
    /// basis states are left unchanged, which keeps the map a self-inverse
    /// permutation of the `d`-level space.
    pub fn apply_copy(&mut self, control: Register, target: Register) -> Result<(), QuditError> {
        if control == target {
            return Err(QuditError::SameRegister(control));
        }
        let d = self.layout.d;
        let cs = self.layout.stride(control)?;
        let ts = self.layout.stride(target)?;
        let mut next = self.amplitudes.clone();
        for (index, &amp) in self.amplitudes.iter().enumerate() {
            let a = (index / cs) % d;
            let b = (index / ts) % d;
            let x = a ^ b;
            if x < d {
                let dest = index - b * ts + x * ts;
                next[dest] = amp;
            }
        }
        self.amplitudes = next;
        self.check_norm();
        Ok(())
    }

    /// Phase kickback of the shadow oracle: `|k> -> e^{2 pi i shadow k / d} |k>`.
    pub fn apply_shadow_phase(&mut self, register: Register, shadow: FieldElement) -> Result<(), QuditError> {
        let d = self.layout.d;
        if shadow.modulus().get() != d as u64 {
            return Err(QuditError::ModulusMismatch {
                got: shadow.modulus().get(),
                d,
            });
        }
        let stride = self.layout.stride(register)?;
        let s = shadow.value() as usize;
        let phases: Vec<Complex64> = (0..d).map(|k| root_of_unity(d, s * k % d)).collect();
        for (index, amp) in self.amplitudes.iter_mut().enumerate() {
            *amp *= phases[(index / stride) % d];
        }
        self.check_norm();
        Ok(())
    }

    /// Probability of each value of one register.
    pub fn marginal(&self, register: Register) -> Result<Vec<f64>, QuditError> {
        let d = self.layout.d;
        let stride = self.layout.stride(register)?;
        let mut probs = vec![0.0; d];
        for (index, amp) in self.amplitudes.iter().enumerate() {
            probs[(index / stride) % d] += amp.norm_sqr();
        }
        Ok(probs)
    }

    /// Projective measurement of one register in the computational basis,
    /// sampled by inverse CDF over the register marginal.
    pub fn measure<R: Rng + ?Sized>(self, register: Register, rng: &mut R) -> Result<MeasurementOutcome, QuditError> {
        let norm = self.norm();
        if (norm - 1.0).abs() > MEASURE_NORM_TOLERANCE {
            return Err(QuditError::NotNormalized(norm));
        }
        let probs = self.marginal(register)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        // Fall back to the last value with nonzero mass to absorb rounding.
        let mut value = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (v, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                value = v;
                break;
            }
        }
        let d = self.layout.d;
        let stride = self.layout.stride(register)?;
        let scale = probs[value].sqrt();
        let mut post = self;
        for (index, amp) in post.amplitudes.iter_mut().enumerate() {
            if (index / stride) % d == value {
                *amp /= scale;
            } else {
                *amp = Complex64::new(0.0, 0.0);
            }
        }
        Ok(MeasurementOutcome {
            register,
            value,
            post_state: post,
        })
    }
}

fn root_of_unity(d: usize, k: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64)
}

/// Row-major DFT matrix; `sign` = +1 for QFT, -1 for its inverse.
fn fourier_matrix(d: usize, sign: f64) -> Vec<Complex64> {
    let scale = 1.0 / (d as f64).sqrt();
    let mut m = Vec::with_capacity(d * d);
    for q in 0..d {
        for s in 0..d {
            let w = root_of_unity(d, q * s % d);
            m.push(if sign > 0.0 { w } else { w.conj() } * scale);
        }
    }
    m
}
