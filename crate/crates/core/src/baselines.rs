//! Classical deep-kernel comparators.
//!
//! Each sequence goes through a small trainable feature map
//!
//! ```text
//! Embedding(4 → 4) → Flatten(8·4 = 32) → Linear(32 → 16) → ReLU → Linear(16 → 16)
//! ```
//!
//! and a kernel head compares two feature vectors. The feature map has
//! `16 + 528 + 272 = 816` parameters; the RBF head adds a bandwidth and the
//! degree-2 polynomial head a scale and an offset.
//!
//! Gradients are written out by hand. A pair shares one set of weights, so
//! both forward passes contribute to the same parameter gradients.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::NucleotideSequence;
use crate::training::{mse_loss, SimilarityModel, TrainableModel};

/// Input length the feature map is built for.
pub const SEQ_LEN: usize = 8;
pub const EMBED_DIM: usize = 4;
pub const HIDDEN: usize = 16;
pub const FEATURES: usize = 16;
const INPUT: usize = SEQ_LEN * EMBED_DIM;

const EMB: usize = 0;
const W1: usize = EMB + 4 * EMBED_DIM;
const B1: usize = W1 + HIDDEN * INPUT;
const W2: usize = B1 + HIDDEN;
const B2: usize = W2 + FEATURES * HIDDEN;
/// Parameters of the feature map alone.
pub const FEATURE_MAP_PARAMS: usize = B2 + FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Cosine,
    Rbf,
    Poly2,
}

impl HeadKind {
    pub const ALL: [HeadKind; 3] = [HeadKind::Rbf, HeadKind::Cosine, HeadKind::Poly2];

    pub fn extra_params(self) -> usize {
        match self {
            HeadKind::Cosine => 0,
            HeadKind::Rbf => 1,
            HeadKind::Poly2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Cosine => "cosine",
            HeadKind::Rbf => "rbf",
            HeadKind::Poly2 => "poly2",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(HeadKind::Cosine),
            "rbf" => Ok(HeadKind::Rbf),
            "poly2" => Ok(HeadKind::Poly2),
            other => Err(Error::Config(format!("unknown kernel head {other:?} (expected rbf, cosine or poly2)"))),
        }
    }
}

/// Head parameters, unpacked from the tail of the flat vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelHead {
    Cosine,
    /// `exp(−γ‖u−v‖²)` with `γ = exp(log_gamma)`.
    Rbf { log_gamma: f64 },
    /// `(scale·u·v + offset)²`.
    Poly2 { scale: f64, offset: f64 },
}

impl KernelHead {
    pub fn kind(&self) -> HeadKind {
        match self {
            KernelHead::Cosine => HeadKind::Cosine,
            KernelHead::Rbf { .. } => HeadKind::Rbf,
            KernelHead::Poly2 { .. } => HeadKind::Poly2,
        }
    }
}

/// Embedding + two-layer perceptron feature map with a kernel head.
///
/// All trainable scalars live in one flat vector: the embedding rows for
/// A, T, G, C; the first affine map as 16 rows of 32 weights, then its 16
/// biases; the second as 16 rows of 16, then its 16 biases; then the head
/// parameters (`log γ`, or scale and offset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalKernelModel {
    head: HeadKind,
    params: Vec<f64>,
}

impl ClassicalKernelModel {
    /// Weights uniform in `±1/√fan_in` (fan-in 4 for the embedding), biases
    /// zero. Head starts at `γ = 1` or `(u·v + 1)²`.
    pub fn init<R: Rng + ?Sized>(head: HeadKind, rng: &mut R) -> Self {
        let mut params = vec![0.0; FEATURE_MAP_PARAMS + head.extra_params()];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..bound);
            }
        };
        fill(EMB..W1, EMBED_DIM);
        fill(W1..B1, INPUT);
        fill(W2..B2, HIDDEN);
        if head == HeadKind::Poly2 {
            params[FEATURE_MAP_PARAMS] = 1.0;
            params[FEATURE_MAP_PARAMS + 1] = 1.0;
        }
        Self { head, params }
    }

    pub fn from_parameters(head: HeadKind, params: Vec<f64>) -> Result<Self> {
        let expected = FEATURE_MAP_PARAMS + head.extra_params();
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: params.len(),
            });
        }
        Ok(Self { head, params })
    }

    pub fn head_kind(&self) -> HeadKind {
        self.head
    }

    pub fn head(&self) -> KernelHead {
        let extra = &self.params[FEATURE_MAP_PARAMS..];
        match self.head {
            HeadKind::Cosine => KernelHead::Cosine,
            HeadKind::Rbf => KernelHead::Rbf { log_gamma: extra[0] },
            HeadKind::Poly2 => KernelHead::Poly2 {
                scale: extra[0],
                offset: extra[1],
            },
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// 16-dimensional feature vector of a length-8 sequence.
    pub fn feature_map(&self, seq: &NucleotideSequence) -> Result<[f64; FEATURES]> {
        Ok(self.forward(seq)?.output)
    }

    fn forward(&self, seq: &NucleotideSequence) -> Result<Activations> {
        if seq.len() != SEQ_LEN {
            return Err(Error::LengthMismatch {
                expected: SEQ_LEN,
                found: seq.len(),
            });
        }
        let p = &self.params;
        let mut input = [0.0; INPUT];
        for (i, base) in seq.iter().enumerate() {
            let row = EMB + base.index() * EMBED_DIM;
            input[i * EMBED_DIM..(i + 1) * EMBED_DIM].copy_from_slice(&p[row..row + EMBED_DIM]);
        }
        let mut hidden = [0.0; HIDDEN];
        for (j, h) in hidden.iter_mut().enumerate() {
            let w = &p[W1 + j * INPUT..W1 + (j + 1) * INPUT];
            *h = p[B1 + j] + w.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>();
        }
        let relu = hidden.map(|h| h.max(0.0));
        let mut output = [0.0; FEATURES];
        for (k, o) in output.iter_mut().enumerate() {
            let w = &p[W2 + k * HIDDEN..W2 + (k + 1) * HIDDEN];
            *o = p[B2 + k] + w.iter().zip(&relu).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(Activations {
            input,
            hidden,
            relu,
            output,
        })
    }

    /// Accumulates `∂/∂params` of a scalar whose gradient with respect to
    /// this sequence's feature vector is `d_output`.
    fn backward(&self, acts: &Activations, seq: &NucleotideSequence, d_output: &[f64; FEATURES], grad: &mut [f64]) {
        let p = &self.params;
        let mut d_relu = [0.0; HIDDEN];
        for (k, &d) in d_output.iter().enumerate() {
            grad[B2 + k] += d;
            for j in 0..HIDDEN {
                grad[W2 + k * HIDDEN + j] += d * acts.relu[j];
                d_relu[j] += d * p[W2 + k * HIDDEN + j];
            }
        }
        let mut d_input = [0.0; INPUT];
        for j in 0..HIDDEN {
            if acts.hidden[j] <= 0.0 {
                continue;
            }
            let d = d_relu[j];
            grad[B1 + j] += d;
            for i in 0..INPUT {
                grad[W1 + j * INPUT + i] += d * acts.input[i];
                d_input[i] += d * p[W1 + j * INPUT + i];
            }
        }
        for (i, base) in seq.iter().enumerate() {
            let row = EMB + base.index() * EMBED_DIM;
            for e in 0..EMBED_DIM {
                grad[row + e] += d_input[i * EMBED_DIM + e];
            }
        }
    }

    /// Kernel value and `∂K/∂params` for one pair.
    pub fn kernel_value_and_gradient(&self, x: &NucleotideSequence, y: &NucleotideSequence) -> Result<(f64, Vec<f64>)> {
        let (ax, ay) = (self.forward(x)?, self.forward(y)?);
        let (k, du, dv, dhead) = head_gradient(&self.head(), &ax.output, &ay.output);
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&ax, x, &du, &mut grad);
        self.backward(&ay, y, &dv, &mut grad);
        grad[FEATURE_MAP_PARAMS..].copy_from_slice(&dhead[..self.head.extra_params()]);
        Ok((k, grad))
    }
}

struct Activations {
    input: [f64; INPUT],
    hidden: [f64; HIDDEN],
    relu: [f64; HIDDEN],
    output: [f64; FEATURES],
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Kernel head value. Cosine returns 0 when either vector is zero.
pub fn classical_kernel(u: &[f64; FEATURES], v: &[f64; FEATURES], head: &KernelHead) -> f64 {
    head_gradient(head, u, v).0
}

/// `(K, ∂K/∂u, ∂K/∂v, ∂K/∂head)`.
fn head_gradient(head: &KernelHead, u: &[f64; FEATURES], v: &[f64; FEATURES]) -> (f64, [f64; FEATURES], [f64; FEATURES], [f64; 2]) {
    let mut du = [0.0; FEATURES];
    let mut dv = [0.0; FEATURES];
    match *head {
        KernelHead::Cosine => {
            let (nu, nv) = (dot(u, u).sqrt(), dot(v, v).sqrt());
            if nu == 0.0 || nv == 0.0 {
                return (0.0, du, dv, [0.0; 2]);
            }
            let k = dot(u, v) / (nu * nv);
            for i in 0..FEATURES {
                du[i] = v[i] / (nu * nv) - k * u[i] / (nu * nu);
                dv[i] = u[i] / (nu * nv) - k * v[i] / (nv * nv);
            }
            (k, du, dv, [0.0; 2])
        }
        KernelHead::Rbf { log_gamma } => {
            let gamma = log_gamma.exp();
            let dist: f64 = u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            let k = (-gamma * dist).exp();
            for i in 0..FEATURES {
                du[i] = -2.0 * gamma * k * (u[i] - v[i]);
                dv[i] = -du[i];
            }
            (k, du, dv, [-gamma * dist * k, 0.0])
        }
        KernelHead::Poly2 { scale, offset } => {
            let uv = dot(u, v);
            let s = scale * uv + offset;
            for i in 0..FEATURES {
                du[i] = 2.0 * s * scale * v[i];
                dv[i] = 2.0 * s * scale * u[i];
            }
            (s * s, du, dv, [2.0 * s * uv, 2.0 * s])
        }
    }
}

/// Loss `(K − target)²` and its gradient for every trainable scalar.
pub fn classical_backward(
    x: &NucleotideSequence,
    y: &NucleotideSequence,
    target: f64,
    model: &ClassicalKernelModel,
) -> Result<(f64, Vec<f64>)> {
    let (k, mut grad) = model.kernel_value_and_gradient(x, y)?;
    let scale = 2.0 * (k - target);
    grad.iter_mut().for_each(|g| *g *= scale);
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("classical gradient component {i} is {}", grad[i])));
    }
    Ok((mse_loss(k, target), grad))
}

impl SimilarityModel for ClassicalKernelModel {
    type Embedding = [f64; FEATURES];

    fn embed(&self, seq: &NucleotideSequence) -> Result<[f64; FEATURES]> {
        self.feature_map(seq)
    }

    fn compare(&self, x: &[f64; FEATURES], y: &[f64; FEATURES]) -> f64 {
        classical_kernel(x, y, &self.head())
    }
}

impl TrainableModel for ClassicalKernelModel {
    fn parameters(&self) -> Vec<f64> {
        self.params.clone()
    }

    fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.params.len() {
            return Err(Error::LengthMismatch {
                expected: self.params.len(),
                found: flat.len(),
            });
        }
        self.params.copy_from_slice(flat);
        Ok(())
    }

    fn value_and_gradient(&self, x: &NucleotideSequence, y: &NucleotideSequence) -> Result<(f64, Vec<f64>)> {
        self.kernel_value_and_gradient(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(s: &str) -> NucleotideSequence {
        s.parse().unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(4 * EMBED_DIM, 16);
        assert_eq!(HIDDEN * INPUT + HIDDEN, 528);
        assert_eq!(FEATURES * HIDDEN + FEATURES, 272);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let counts: Vec<usize> = [HeadKind::Cosine, HeadKind::Rbf, HeadKind::Poly2]
            .iter()
            .map(|&h| ClassicalKernelModel::init(h, &mut rng).num_params())
            .collect();
        assert_eq!(counts, vec![816, 817, 818]);
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut params = vec![0.0; FEATURE_MAP_PARAMS];
        for k in 0..FEATURES {
            params[B2 + k] = k as f64 * 0.1;
        }
        let m = ClassicalKernelModel::from_parameters(HeadKind::Cosine, params).unwrap();
        let u = m.feature_map(&seq("ATGCATGC")).unwrap();
        for (k, v) in u.iter().enumerate() {
            assert_eq!(*v, k as f64 * 0.1);
        }
        assert!(matches!(m.feature_map(&seq("ATG")), Err(Error::LengthMismatch { expected: 8, found: 3 })));
    }

    #[test]
    fn head_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: [f64; FEATURES] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let v: [f64; FEATURES] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        assert!((classical_kernel(&u, &u, &KernelHead::Cosine) - 1.0).abs() < 1e-12);
        assert_eq!(classical_kernel(&u, &[0.0; FEATURES], &KernelHead::Cosine), 0.0);
        assert_eq!(classical_kernel(&u, &u, &KernelHead::Rbf { log_gamma: 0.3 }), 1.0);
        let poly = KernelHead::Poly2 { scale: 0.0, offset: 0.7 };
        assert!((classical_kernel(&u, &v, &poly) - 0.49).abs() < 1e-15);
    }

    #[test]
    fn cosine_self_pair_has_no_head_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = ClassicalKernelModel::init(HeadKind::Cosine, &mut rng);
        let x = seq("ATGCATGC");
        let (k, g) = m.kernel_value_and_gradient(&x, &x).unwrap();
        assert!((k - 1.0).abs() < 1e-12);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rbf_bandwidth_gradient_is_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ClassicalKernelModel::init(HeadKind::Rbf, &mut rng);
        let (_, g) = m.kernel_value_and_gradient(&seq("ATGCATGC"), &seq("TTTTGGGG")).unwrap();
        assert!(g[FEATURE_MAP_PARAMS] < 0.0);
    }

    #[test]
    fn head_names_parse() {
        for h in HeadKind::ALL {
            assert_eq!(h.name().parse::<HeadKind>().unwrap(), h);
        }
        assert!("linear".parse::<HeadKind>().is_err());
    }

    fn loss(model: &ClassicalKernelModel, x: &NucleotideSequence, y: &NucleotideSequence, target: f64) -> f64 {
        mse_loss(model.similarity(x, y).unwrap(), target)
    }

    fn min_preactivation(model: &ClassicalKernelModel, seqs: &[&NucleotideSequence]) -> f64 {
        seqs.iter()
            .flat_map(|s| model.forward(s).unwrap().hidden)
            .map(f64::abs)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-6;
        for case in 0..12 {
            let head = HeadKind::ALL[case % 3];
            let x = crate::dataset::random_sequence(&mut rng, SEQ_LEN).unwrap();
            let y = crate::dataset::random_sequence(&mut rng, SEQ_LEN).unwrap();
            let mut model = ClassicalKernelModel::init(head, &mut rng);
            while min_preactivation(&model, &[&x, &y]) < 1e-3 {
                model = ClassicalKernelModel::init(head, &mut rng);
            }
            let target = rng.gen_range(0.0..1.0);
            let (_, grad) = classical_backward(&x, &y, target, &model).unwrap();
            for (i, &g) in grad.iter().enumerate() {
                let mut plus = model.clone();
                plus.params_mut()[i] += h;
                let mut minus = model.clone();
                minus.params_mut()[i] -= h;
                let fd = (loss(&plus, &x, &y, target) - loss(&minus, &x, &y, target)) / (2.0 * h);
                assert!((g - fd).abs() <= 1e-4 * g.abs().max(1e-3), "{head} param {i}: {g} vs {fd}");
            }
        }
    }
}

