//! The variational quantum kernel `K_θ(x, y) = |⟨ψ_θ(y)|ψ_θ(x)⟩|²` and its
//! exact gradient.
//!
//! The kernel equals the all-zeros probability of the doubled circuit
//! `U†V†(y)V(x)U|0⟩`, but two feature states and one inner product are
//! cheaper and expose the overlap `c(θ)` needed for derivatives.
//!
//! Gradients use an adjoint sweep. With `c = ⟨ψ(y)|ψ(x)⟩` both states depend
//! on θ, so
//!
//! ```text
//! ∂K/∂θ_k = 2·Re(conj(c)·(⟨ψ(y)|∂_k ψ(x)⟩ + conj(⟨ψ(x)|∂_k ψ(y)⟩)))
//! ```
//!
//! Each term is one backward pass over a single circuit that pulls the other
//! state back gate by gate and sandwiches the gate generator:
//! `X⊗⋯⊗X` for `RNX`, `Σ Z_k` for the shared `Rz`, `Σ Y_k` for the shared `Ry`.

use num_complex::Complex64;

use crate::circuits::{adjoint, encoding_matrix, feature_state, KernelParams};
use crate::error::{Error, Result};
use crate::sequence::{Nucleotide, NucleotideSequence};
use crate::training::{SimilarityModel, TrainableModel};
use crate::statevector::{braket, braket_sum_z, braket_x_all, ry_matrix, Statevector};

type Mat2 = [[Complex64; 2]; 2];

const MINUS_HALF_I: Complex64 = Complex64::new(0.0, -0.5);

/// Kernel value `|⟨ψ_θ(y)|ψ_θ(x)⟩|²`, in `[0, 1]`.
pub fn kernel_eval(x: &NucleotideSequence, y: &NucleotideSequence, params: &KernelParams) -> Result<f64> {
    check_lengths(x, y)?;
    let sx = feature_state(x, params)?;
    let sy = feature_state(y, params)?;
    Ok(overlap_probability(&sy, &sx))
}

/// `|⟨a|b⟩|²` for states of equal width, clamped to `[0, 1]`.
pub fn overlap_probability(a: &Statevector, b: &Statevector) -> f64 {
    braket(a.amplitudes(), b.amplitudes()).norm_sqr().min(1.0)
}

/// `∂K/∂θ` in the flat layout of [`KernelParams::to_flat`].
pub fn kernel_gradient(
    x: &NucleotideSequence,
    y: &NucleotideSequence,
    params: &KernelParams,
) -> Result<Vec<f64>> {
    kernel_value_and_gradient(x, y, params).map(|(_, g)| g)
}

/// Kernel value together with its gradient, sharing one forward pass.
pub fn kernel_value_and_gradient(
    x: &NucleotideSequence,
    y: &NucleotideSequence,
    params: &KernelParams,
) -> Result<(f64, Vec<f64>)> {
    check_lengths(x, y)?;
    let tx = Tape::record(x, params)?;
    let ty = Tape::record(y, params)?;
    let c = braket(ty.output(), tx.output());

    let dx = tx.overlap_derivative(ty.output());
    let dy = ty.overlap_derivative(tx.output());
    let grad = dx
        .iter()
        .zip(&dy)
        .map(|(a, b)| 2.0 * (c.conj() * (a + b.conj())).re)
        .collect();
    Ok((c.norm_sqr().min(1.0), grad))
}

/// The trainable kernel as a model: embedding is the feature state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumKernel {
    pub params: KernelParams,
}

impl QuantumKernel {
    pub fn new(params: KernelParams) -> Self {
        Self { params }
    }
}

impl SimilarityModel for QuantumKernel {
    type Embedding = Statevector;

    fn embed(&self, seq: &NucleotideSequence) -> Result<Statevector> {
        feature_state(seq, &self.params)
    }

    fn compare(&self, x: &Statevector, y: &Statevector) -> f64 {
        overlap_probability(y, x)
    }
}

impl TrainableModel for QuantumKernel {
    fn parameters(&self) -> Vec<f64> {
        self.params.to_flat()
    }

    fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.params.num_params() {
            return Err(Error::LengthMismatch {
                expected: self.params.num_params(),
                found: flat.len(),
            });
        }
        self.params = KernelParams::from_flat(flat)?;
        Ok(())
    }

    fn value_and_gradient(&self, x: &NucleotideSequence, y: &NucleotideSequence) -> Result<(f64, Vec<f64>)> {
        kernel_value_and_gradient(x, y, &self.params)
    }
}

fn check_lengths(x: &NucleotideSequence, y: &NucleotideSequence) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Forward pass of one feature circuit with the intermediate states the
/// adjoint sweep needs.
///
/// The per-layer shared `Ry(c)` and the encoding `V(x)` are fused into one
/// single-qubit matrix `E_q·Ry(c)` per qubit.
struct Tape<'a> {
    params: &'a KernelParams,
    bases: Vec<Nucleotide>,
    /// Per layer: state after `RNX`, after `Rz`, after the fused `V·Ry`.
    checkpoints: Vec<[Statevector; 3]>,
}

impl<'a> Tape<'a> {
    fn record(seq: &NucleotideSequence, params: &'a KernelParams) -> Result<Self> {
        let mut state = Statevector::zero_state(seq.len())?;
        let encoders: Vec<Mat2> = seq.iter().map(|&b| encoding_matrix(b)).collect();
        let mut checkpoints = Vec::with_capacity(params.num_layers());
        for layer in params.layers() {
            state.apply_rnx(layer.rnx);
            let after_rnx = state.clone();
            state.apply_rz_all(layer.rz);
            let after_rz = state.clone();
            let ry = ry_matrix(layer.ry);
            for (q, e) in encoders.iter().enumerate() {
                state.apply_single(q, matmul(e, &ry))?;
            }
            checkpoints.push([after_rnx, after_rz, state.clone()]);
        }
        Ok(Self {
            params,
            bases: seq.to_vec(),
            checkpoints,
        })
    }

    fn output(&self) -> &[Complex64] {
        self.checkpoints
            .last()
            .expect("at least one layer")[2]
            .amplitudes()
    }

    /// `∂_k ⟨bra|ψ⟩` for every parameter, `bra` held fixed.
    fn overlap_derivative(&self, bra: &[Complex64]) -> Vec<Complex64> {
        let n = self.bases.len();
        let mut lambda = Statevector::from_amplitudes(bra.to_vec()).expect("bra is a valid state");
        let encoders: Vec<Mat2> = self.bases.iter().map(|&b| encoding_matrix(b)).collect();
        // Ry generator conjugated through the encoding: E·Y·E†, per qubit.
        let ry_generators: Vec<Mat2> = encoders
            .iter()
            .map(|e| matmul(&matmul(e, &PAULI_Y), &adjoint(*e)))
            .collect();

        let mut grad = vec![Complex64::new(0.0, 0.0); self.params.num_params()];
        for (l, layer) in self.params.layers().iter().enumerate().rev() {
            let [after_rnx, after_rz, after_layer] = &self.checkpoints[l];

            grad[3 * l + 2] = MINUS_HALF_I * braket_local_sum(lambda.amplitudes(), after_layer.amplitudes(), &ry_generators);
            let ry_inv = ry_matrix(-layer.ry);
            for (q, e) in encoders.iter().enumerate() {
                lambda
                    .apply_single(q, matmul(&ry_inv, &adjoint(*e)))
                    .expect("qubit in range");
            }

            grad[3 * l + 1] = MINUS_HALF_I * braket_sum_z(lambda.amplitudes(), after_rz.amplitudes(), n);
            lambda.apply_rz_all(-layer.rz);

            grad[3 * l] = MINUS_HALF_I * braket_x_all(lambda.amplitudes(), after_rnx.amplitudes());
            lambda.apply_rnx(-layer.rnx);
        }
        grad
    }
}

const PAULI_Y: Mat2 = [
    [Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
    [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
];

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `⟨bra| Σ_q G_q |ket⟩` where `G_q` acts on qubit `q` alone.
fn braket_local_sum(bra: &[Complex64], ket: &[Complex64], generators: &[Mat2]) -> Complex64 {
    let n = generators.len();
    let mut total = Complex64::new(0.0, 0.0);
    for (q, g) in generators.iter().enumerate() {
        let mask = 1 << (n - 1 - q);
        for i in (0..ket.len()).filter(|i| i & mask == 0) {
            let j = i | mask;
            let (k0, k1) = (ket[i], ket[j]);
            total += bra[i].conj() * (g[0][0] * k0 + g[0][1] * k1) + bra[j].conj() * (g[1][0] * k0 + g[1][1] * k1);
        }
    }
    total
}
