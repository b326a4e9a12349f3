//! Feature-state circuits: the SIC-POVM encoding layer `V(x)`, the
//! permutation-invariant trainable layer `U(θ)`, and their data re-uploading
//! composition
//!
//! ```text
//! |ψ_θ(x)⟩ = V(x)·U(θ_L) ⋯ V(x)·U(θ_1) |0⟩
//! ```
//!
//! Each base is written onto its own qubit as one of four single-qubit states
//! whose pairwise squared overlaps are all `1/3` (a regular tetrahedron on the
//! Bloch sphere). The trainable layer is `RNX(a)`, then `Rz(b)` on every
//! qubit, then `Ry(c)` on every qubit; with the same `(b, c)` on all qubits it
//! commutes with every qubit swap.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Nucleotide, NucleotideSequence};
use crate::statevector::{ry_matrix, Statevector};

/// Polar angle shared by T, G and C: `2·arccos(1/√3)`.
pub fn sic_polar_angle() -> f64 {
    2.0 * (1.0 / 3f64.sqrt()).acos()
}

/// `(Ry angle, phase angle)` that prepare the base's state from `|0⟩`.
pub fn base_angles(base: Nucleotide) -> (f64, f64) {
    match base {
        Nucleotide::A => (0.0, 0.0),
        Nucleotide::T => (sic_polar_angle(), 0.0),
        Nucleotide::G => (sic_polar_angle(), 2.0 * PI / 3.0),
        Nucleotide::C => (sic_polar_angle(), 4.0 * PI / 3.0),
    }
}

/// `P(φ)·Ry(α)` for the base, as a 2×2 matrix.
pub(crate) fn encoding_matrix(base: Nucleotide) -> [[Complex64; 2]; 2] {
    let (ry, phase) = base_angles(base);
    let [[a, b], [c, d]] = ry_matrix(ry);
    let p = Complex64::from_polar(1.0, phase);
    [[a, b], [p * c, p * d]]
}

pub(crate) fn adjoint(m: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

/// Angles of one trainable layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerAngles {
    pub rnx: f64,
    pub rz: f64,
    pub ry: f64,
}

impl LayerAngles {
    pub const ZERO: LayerAngles = LayerAngles {
        rnx: 0.0,
        rz: 0.0,
        ry: 0.0,
    };

    pub fn new(rnx: f64, rz: f64, ry: f64) -> Self {
        Self { rnx, rz, ry }
    }
}

/// Trainable angles for `L` re-uploading layers, three per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    layers: Vec<LayerAngles>,
}

impl KernelParams {
    pub fn new(layers: Vec<LayerAngles>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a kernel needs at least one layer".into()));
        }
        Ok(Self { layers })
    }

    pub fn zeros(num_layers: usize) -> Result<Self> {
        Self::new(vec![LayerAngles::ZERO; num_layers])
    }

    /// Every angle drawn uniformly from `(−π, π]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, num_layers: usize) -> Result<Self> {
        let mut draw = || -rng.gen_range(-PI..PI);
        let layers = (0..num_layers)
            .map(|_| LayerAngles::new(draw(), draw(), draw()))
            .collect();
        Self::new(layers)
    }

    /// Rebuilds from the flat layout produced by [`KernelParams::to_flat`].
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(3) {
            return Err(Error::Config(format!(
                "parameter count {} is not a multiple of 3",
                flat.len()
            )));
        }
        Self::new(
            flat.chunks_exact(3)
                .map(|c| LayerAngles::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    /// `[rnx_1, rz_1, ry_1, rnx_2, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| [l.rnx, l.rz, l.ry]).collect()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_params(&self) -> usize {
        3 * self.layers.len()
    }

    pub fn layers(&self) -> &[LayerAngles] {
        &self.layers
    }
}

/// `V(x)`: base `i` written onto qubit `i`. No entangling gates.
pub fn apply_encoding_layer(state: &mut Statevector, seq: &NucleotideSequence) -> Result<()> {
    check_width(state, seq)?;
    for (qubit, &base) in seq.iter().enumerate() {
        let (ry, phase) = base_angles(base);
        if base != Nucleotide::A {
            state.apply_ry(qubit, ry)?;
            state.apply_phase(qubit, phase)?;
        }
    }
    Ok(())
}

/// `U(θ_l)`: `RNX`, then shared `Rz` on every qubit, then shared `Ry` on
/// every qubit.
pub fn apply_param_layer(state: &mut Statevector, angles: LayerAngles) {
    state.apply_rnx(angles.rnx);
    state.apply_rz_all(angles.rz);
    state.apply_ry_all(angles.ry);
}

/// `|ψ_θ(x)⟩`, starting from `|0⟩` with one `U` then `V` block per layer.
pub fn feature_state(seq: &NucleotideSequence, params: &KernelParams) -> Result<Statevector> {
    let mut state = Statevector::zero_state(seq.len())?;
    let encoders: Vec<_> = seq.iter().map(|&b| encoding_matrix(b)).collect();
    for &layer in params.layers() {
        apply_param_layer(&mut state, layer);
        apply_encoders(&mut state, &encoders);
    }
    Ok(state)
}

pub(crate) fn apply_encoders(state: &mut Statevector, encoders: &[[[Complex64; 2]; 2]]) {
    for (qubit, &m) in encoders.iter().enumerate() {
        state
            .apply_single(qubit, m)
            .expect("encoder count matches register width");
    }
}

fn check_width(state: &Statevector, seq: &NucleotideSequence) -> Result<()> {
    if seq.len() != state.num_qubits() {
        return Err(Error::LengthMismatch {
            expected: state.num_qubits(),
            found: seq.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::inner_product;
    use crate::statevector::testutil::{assert_close, random_state};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn seq(s: &str) -> NucleotideSequence {
        s.parse().unwrap()
    }

    fn random_seq(rng: &mut ChaCha8Rng, n: usize) -> NucleotideSequence {
        NucleotideSequence::new((0..n).map(|_| Nucleotide::from_index(rng.gen_range(0..4))).collect()).unwrap()
    }

    /// The four single-qubit states written out literally.
    fn table_state(base: Nucleotide) -> [Complex64; 2] {
        let (a, b) = (1.0 / 3f64.sqrt(), (2.0 / 3.0f64).sqrt());
        match base {
            Nucleotide::A => [c(1.0, 0.0), c(0.0, 0.0)],
            Nucleotide::T => [c(a, 0.0), c(b, 0.0)],
            Nucleotide::G => [c(a, 0.0), Complex64::from_polar(b, 2.0 * PI / 3.0)],
            Nucleotide::C => [c(a, 0.0), Complex64::from_polar(b, 4.0 * PI / 3.0)],
        }
    }

    #[test]
    fn angles_per_base() {
        assert_eq!(base_angles(Nucleotide::A), (0.0, 0.0));
        assert_eq!(base_angles(Nucleotide::T), (2.0 * (1.0 / 3f64.sqrt()).acos(), 0.0));
        assert_eq!(base_angles(Nucleotide::C), (2.0 * (1.0 / 3f64.sqrt()).acos(), 4.0 * PI / 3.0));
    }

    #[test]
    fn encoding_reproduces_each_base_state() {
        for base in Nucleotide::ALL {
            let mut s = Statevector::zero_state(1).unwrap();
            apply_encoding_layer(&mut s, &NucleotideSequence::new(vec![base]).unwrap()).unwrap();
            assert_close(s.amplitudes(), &table_state(base), 1e-15);

            let m = encoding_matrix(base);
            let mut t = Statevector::zero_state(1).unwrap();
            t.apply_single(0, m).unwrap();
            assert_close(t.amplitudes(), &table_state(base), 1e-15);
        }
    }

    #[test]
    fn sic_overlaps_are_one_third() {
        for (i, &a) in Nucleotide::ALL.iter().enumerate() {
            for &b in &Nucleotide::ALL[i + 1..] {
                let (x, y) = (table_state(a), table_state(b));
                let overlap = (x[0].conj() * y[0] + x[1].conj() * y[1]).norm_sqr();
                assert!((overlap - 1.0 / 3.0).abs() < 1e-12, "{a}{b}: {overlap}");
            }
        }
    }

    #[test]
    fn encoding_is_a_product_state() {
        let mut s = Statevector::zero_state(2).unwrap();
        apply_encoding_layer(&mut s, &seq("AT")).unwrap();
        let t = table_state(Nucleotide::T);
        assert_close(s.amplitudes(), &[t[0], t[1], c(0.0, 0.0), c(0.0, 0.0)], 1e-15);
    }

    #[test]
    fn encoding_width_checked() {
        let mut s = Statevector::zero_state(3).unwrap();
        assert!(matches!(
            apply_encoding_layer(&mut s, &seq("AT")),
            Err(Error::LengthMismatch { expected: 3, found: 2 })
        ));
        assert!(feature_state(&seq("ATG"), &KernelParams::zeros(2).unwrap()).is_ok());
    }

    #[test]
    fn param_layer_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_state(&mut rng, 3);
        let mut t = s.clone();
        apply_param_layer(&mut t, LayerAngles::ZERO);
        assert_close(t.amplitudes(), s.amplitudes(), 1e-15);

        let theta = 0.9;
        let mut s = Statevector::zero_state(2).unwrap();
        apply_param_layer(&mut s, LayerAngles::new(theta, 0.0, 0.0));
        let (sn, cs) = (theta / 2.0).sin_cos();
        assert_close(s.amplitudes(), &[c(cs, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -sn)], 1e-15);
    }

    #[test]
    fn param_layer_commutes_with_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = rng.gen_range(2..=6);
            let s = random_state(&mut rng, n);
            let angles = LayerAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let mut direct = s.clone();
            apply_param_layer(&mut direct, angles);
            for i in 0..n {
                for j in i + 1..n {
                    let mut conj = s.clone();
                    conj.apply_swap(i, j).unwrap();
                    apply_param_layer(&mut conj, angles);
                    conj.apply_swap(i, j).unwrap();
                    assert_close(conj.amplitudes(), direct.amplitudes(), 1e-12);
                }
            }
        }
    }

    #[test]
    fn encoding_covariant_under_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let n = rng.gen_range(2..=6);
            let x = random_seq(&mut rng, n);
            let s = random_state(&mut rng, n);
            for i in 0..n {
                for j in i + 1..n {
                    let mut lhs = s.clone();
                    apply_encoding_layer(&mut lhs, &x.swapped(i, j)).unwrap();
                    let mut rhs = s.clone();
                    rhs.apply_swap(i, j).unwrap();
                    apply_encoding_layer(&mut rhs, &x).unwrap();
                    rhs.apply_swap(i, j).unwrap();
                    assert_close(lhs.amplitudes(), rhs.amplitudes(), 1e-12);
                }
            }
        }
    }

    #[test]
    fn feature_state_with_zero_angles_is_the_encoding() {
        let s = feature_state(&seq("AT"), &KernelParams::zeros(1).unwrap()).unwrap();
        let t = table_state(Nucleotide::T);
        assert_close(s.amplitudes(), &[t[0], t[1], c(0.0, 0.0), c(0.0, 0.0)], 1e-15);

        let s = feature_state(&seq("A"), &KernelParams::zeros(1).unwrap()).unwrap();
        assert_close(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)], 1e-15);
    }

    #[test]
    fn feature_state_matches_layerwise_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = random_seq(&mut rng, 5);
        let params = KernelParams::random(&mut rng, 4).unwrap();
        let mut expected = Statevector::zero_state(5).unwrap();
        for &l in params.layers() {
            apply_param_layer(&mut expected, l);
            apply_encoding_layer(&mut expected, &x).unwrap();
        }
        let got = feature_state(&x, &params).unwrap();
        assert_close(got.amplitudes(), expected.amplitudes(), 1e-13);
    }

    #[test]
    fn feature_state_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let n = rng.gen_range(1..=8);
            let x = random_seq(&mut rng, n);
            let layers = rng.gen_range(1..=8);
            let params = KernelParams::random(&mut rng, layers).unwrap();
            let s = feature_state(&x, &params).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            assert!((inner_product(&s, &s).unwrap().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_counts() {
        for (layers, count) in [(24, 72), (12, 36), (6, 18)] {
            let p = KernelParams::zeros(layers).unwrap();
            assert_eq!(p.num_params(), count);
            assert_eq!(p.to_flat().len(), count);
        }
        assert!(KernelParams::zeros(0).is_err());
    }

    #[test]
    fn random_angles_in_half_open_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let p = KernelParams::random(&mut rng, 200).unwrap();
        assert!(p.to_flat().iter().all(|&a| a > -PI && a <= PI));
        assert_eq!(KernelParams::from_flat(&p.to_flat()).unwrap(), p);
        assert!(KernelParams::from_flat(&[0.0; 4]).is_err());
    }
}
