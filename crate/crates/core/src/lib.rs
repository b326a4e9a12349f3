//! Permutation-invariant variational quantum kernel for comparing short DNA
//! sequences.

pub mod baselines;
pub mod circuits;
pub mod dataset;
pub mod edm;
pub mod error;
pub mod kernel;
pub mod sequence;
pub mod statevector;
pub mod training;

pub use baselines::{ClassicalKernelModel, HeadKind, KernelHead};
pub use circuits::{KernelParams, LayerAngles};
pub use error::{Error, Result};
pub use kernel::QuantumKernel;
pub use sequence::{Nucleotide, NucleotideSequence};
pub use statevector::Statevector;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/invariant-layer.md")]
    mod invariant_layer {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    mod kernel {}
    #[doc = include_str!("../../../book/src/edm.md")]
    mod edm {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
