//! Dense pure-state simulator.
//!
//! Only the gates the kernel circuits need are provided. Qubit 0 is the most
//! significant bit of the amplitude index, so `|q0 q1 ... q(n-1)⟩` maps to
//! index `q0·2^(n-1) + ... + q(n-1)`.
//!
//! Gate conventions:
//!
//! | gate      | matrix                                             |
//! |-----------|----------------------------------------------------|
//! | `Ry(θ)`   | `[[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]`        |
//! | `Rz(θ)`   | `diag(e^{−iθ/2}, e^{iθ/2})`                        |
//! | `P(φ)`    | `diag(1, e^{iφ})`                                  |
//! | `RNX(θ)`  | `exp(−i θ/2 · X⊗⋯⊗X)`                              |

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the dense representation accepts.
pub const MAX_QUBITS: usize = 12;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero_state(num_qubits: usize) -> Result<Self> {
        check_qubit_count(num_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. The length must be a power of two in range and
    /// the vector must be normalized to within `1e-10`.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(Error::Config(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_qubit_count(num_qubits)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("state is not normalized: ‖ψ‖² = {norm}")));
        }
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, qubit: usize) -> Result<usize> {
        if qubit >= self.num_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(1 << (self.num_qubits - 1 - qubit))
    }

    /// Applies an arbitrary 2×2 matrix `[[m00, m01], [m10, m11]]` to `qubit`.
    pub(crate) fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) -> Result<()> {
        let mask = self.mask(qubit)?;
        apply_single_masked(&mut self.amplitudes, mask, m);
        Ok(())
    }

    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.apply_single(qubit, ry_matrix(angle))
    }

    pub fn apply_rz(&mut self, qubit: usize, angle: f64) -> Result<()> {
        let mask = self.mask(qubit)?;
        let (lo, hi) = (Complex64::from_polar(1.0, -angle / 2.0), Complex64::from_polar(1.0, angle / 2.0));
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= if i & mask == 0 { lo } else { hi };
        }
        Ok(())
    }

    pub fn apply_phase(&mut self, qubit: usize, angle: f64) -> Result<()> {
        let mask = self.mask(qubit)?;
        let phase = Complex64::from_polar(1.0, angle);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & mask != 0 {
                *a *= phase;
            }
        }
        Ok(())
    }

    /// `exp(−i θ/2 · X⊗⋯⊗X)` on every qubit. `X⊗⋯⊗X` is the full bit
    /// complement, so only amplitude pairs `(i, !i)` couple.
    pub fn apply_rnx(&mut self, angle: f64) {
        let (s, c) = (angle / 2.0).sin_cos();
        let full = self.amplitudes.len() - 1;
        for i in 0..self.amplitudes.len() / 2 {
            let j = i ^ full;
            let (a, b) = (self.amplitudes[i], self.amplitudes[j]);
            self.amplitudes[i] = a * c - I * s * b;
            self.amplitudes[j] = b * c - I * s * a;
        }
    }

    /// `Rz(θ)` on every qubit. The product is diagonal with phase
    /// `exp(−iθ/2 · (n − 2·popcount(i)))`.
    pub fn apply_rz_all(&mut self, angle: f64) {
        let n = self.num_qubits as i32;
        let phases: Vec<Complex64> = (0..=n)
            .map(|ones| Complex64::from_polar(1.0, -angle / 2.0 * f64::from(n - 2 * ones)))
            .collect();
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= phases[i.count_ones() as usize];
        }
    }

    /// `Ry(θ)` on every qubit.
    pub fn apply_ry_all(&mut self, angle: f64) {
        let m = ry_matrix(angle);
        for q in 0..self.num_qubits {
            apply_single_masked(&mut self.amplitudes, 1 << q, m);
        }
    }

    /// Exchanges qubits `i` and `j`.
    pub fn apply_swap(&mut self, i: usize, j: usize) -> Result<()> {
        let (mi, mj) = (self.mask(i)?, self.mask(j)?);
        if mi == mj {
            return Ok(());
        }
        for k in 0..self.amplitudes.len() {
            if k & mi != 0 && k & mj == 0 {
                self.amplitudes.swap(k, k ^ mi ^ mj);
            }
        }
        Ok(())
    }
}

/// `⟨a|b⟩ = Σ conj(a_i)·b_i`.
pub fn inner_product(a: &Statevector, b: &Statevector) -> Result<Complex64> {
    if a.num_qubits != b.num_qubits {
        return Err(Error::DimensionMismatch {
            left: a.num_qubits,
            right: b.num_qubits,
        });
    }
    Ok(braket(&a.amplitudes, &b.amplitudes))
}

pub(crate) fn braket(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `⟨bra| X⊗⋯⊗X |ket⟩`.
pub(crate) fn braket_x_all(bra: &[Complex64], ket: &[Complex64]) -> Complex64 {
    let full = ket.len() - 1;
    bra.iter()
        .enumerate()
        .map(|(i, b)| b.conj() * ket[i ^ full])
        .sum()
}

/// `⟨bra| Σ_k Z_k |ket⟩`.
pub(crate) fn braket_sum_z(bra: &[Complex64], ket: &[Complex64], num_qubits: usize) -> Complex64 {
    let n = num_qubits as i32;
    bra.iter()
        .zip(ket)
        .enumerate()
        .map(|(i, (b, k))| b.conj() * k * f64::from(n - 2 * i.count_ones() as i32))
        .sum()
}

/// `⟨bra| Σ_k Y_k |ket⟩`.
#[cfg(test)]
pub(crate) fn braket_sum_y(bra: &[Complex64], ket: &[Complex64], num_qubits: usize) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for q in 0..num_qubits {
        let mask = 1 << q;
        for (i, b) in bra.iter().enumerate() {
            // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
            let term = b.conj() * ket[i ^ mask];
            total += if i & mask == 0 { -I * term } else { I * term };
        }
    }
    total
}

pub(crate) fn ry_matrix(angle: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (angle / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

fn apply_single_masked(amps: &mut [Complex64], mask: usize, m: [[Complex64; 2]; 2]) {
    for i in 0..amps.len() {
        if i & mask == 0 {
            let j = i | mask;
            let (a0, a1) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

fn check_qubit_count(num_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&num_qubits) {
        Ok(())
    } else {
        Err(Error::QubitCount(num_qubits))
    }
}
