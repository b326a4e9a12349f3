//! Mini-batch SGD against similarity labels, order-accuracy evaluation and
//! multi-run statistics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{LabeledPair, LabeledTriplet};
use crate::error::{Error, Result};
use crate::sequence::NucleotideSequence;

/// A pairwise similarity function that factors through a per-sequence
/// embedding, so a test sweep embeds each sequence once.
pub trait SimilarityModel: Sync {
    type Embedding: Send + Sync;

    fn embed(&self, seq: &NucleotideSequence) -> Result<Self::Embedding>;

    fn compare(&self, x: &Self::Embedding, y: &Self::Embedding) -> f64;

    fn similarity(&self, x: &NucleotideSequence, y: &NucleotideSequence) -> Result<f64> {
        Ok(self.compare(&self.embed(x)?, &self.embed(y)?))
    }
}

/// A model with a flat trainable parameter vector and exact gradients.
pub trait TrainableModel: SimilarityModel {
    fn parameters(&self) -> Vec<f64>;

    fn set_parameters(&mut self, flat: &[f64]) -> Result<()>;

    /// Model output and its gradient with respect to [`Self::parameters`].
    fn value_and_gradient(&self, x: &NucleotideSequence, y: &NucleotideSequence) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub num_layers: usize,
    pub batch_size: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 100,
            num_layers: 24,
            batch_size: 1,
            runs: 10,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("learning rate {} must be finite and non-negative", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.num_layers == 0 {
            return Err(Error::Config("at least one layer is required".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("at least one run is required".into()));
        }
        Ok(())
    }

    /// The generator for run `run`: one ChaCha stream per run off the
    /// shared seed.
    pub fn run_rng(&self, run: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run as u64);
        rng
    }
}

pub fn mse_loss(pred: f64, target: f64) -> f64 {
    (pred - target).powi(2)
}

/// Fraction of triplets where `K(a,b) − K(a,c)` has the same sign as
/// `s_ab − s_ac`. Predicted ties count as wrong; ground-truth ties are
/// rejected.
pub fn order_accuracy<M: SimilarityModel + ?Sized>(model: &M, triplets: &[LabeledTriplet]) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::Config("order accuracy needs at least one triplet".into()));
    }
    if let Some((index, t)) = triplets.iter().enumerate().find(|(_, t)| t.d_ab == t.d_ac) {
        return Err(Error::GroundTruthTie {
            index,
            distance: t.d_ab,
        });
    }
    let correct = triplets
        .par_iter()
        .map(|t| {
            let a = model.embed(&t.a)?;
            let k_ab = model.compare(&a, &model.embed(&t.b)?);
            let k_ac = model.compare(&a, &model.embed(&t.c)?);
            let truth = t.s_ab > t.s_ac;
            Ok(usize::from(k_ab != k_ac && (k_ab > k_ac) == truth))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / triplets.len() as f64)
}

/// Mean squared error of the model over `pairs`.
pub fn mean_loss<M: SimilarityModel + ?Sized>(model: &M, pairs: &[LabeledPair]) -> Result<f64> {
    let losses = pairs
        .par_iter()
        .map(|p| Ok(mse_loss(model.similarity(&p.x, &p.y)?, p.target)))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// One pass over `pairs` in a shuffled order. Each mini-batch takes the step
/// `θ ← θ − lr · mean(2(K − S)·∂K/∂θ)`. Returns the mean loss over the epoch,
/// each pair's loss taken before its batch's update.
pub fn train_epoch<M: TrainableModel>(
    model: &mut M,
    pairs: &[LabeledPair],
    config: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Config("training needs at least one pair".into()));
    }
    config.validate()?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(rng);

    let mut theta = model.parameters();
    let mut total_loss = 0.0;
    for batch in order.chunks(config.batch_size) {
        let results = batch
            .par_iter()
            .map(|&i| {
                let p = &pairs[i];
                let (k, grad) = model.value_and_gradient(&p.x, &p.y)?;
                Ok((k, p.target, grad))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut step = vec![0.0; theta.len()];
        for (k, target, grad) in &results {
            total_loss += mse_loss(*k, *target);
            let scale = 2.0 * (k - target) / batch.len() as f64;
            for (s, g) in step.iter_mut().zip(grad) {
                *s += scale * g;
            }
        }
        if let Some(k) = step.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {k} is {}", step[k])));
        }
        for (t, s) in theta.iter_mut().zip(&step) {
            *t -= config.learning_rate * s;
        }
        model.set_parameters(&theta)?;
    }
    Ok(total_loss / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_order_accuracy: f64,
    pub best_so_far: f64,
}

/// Per-epoch records; epoch 0 is the evaluation before any update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub records: Vec<EpochRecord>,
}

impl LearningCurve {
    pub fn push(&mut self, epoch: usize, train_mse: f64, test_order_accuracy: f64) {
        let best_so_far = self
            .records
            .last()
            .map_or(test_order_accuracy, |r| r.best_so_far.max(test_order_accuracy));
        self.records.push(EpochRecord {
            epoch,
            train_mse,
            test_order_accuracy,
            best_so_far,
        });
    }

    pub fn best(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.best_so_far)
    }
}

/// Trains an already initialized model for `config.epochs` epochs,
/// evaluating on `test` before training and after every epoch.
///
/// `on_epoch` sees each record as it is produced.
pub fn train_run<M: TrainableModel>(
    model: &mut M,
    config: &TrainingConfig,
    rng: &mut ChaCha8Rng,
    train: &[LabeledPair],
    test: &[LabeledTriplet],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<LearningCurve> {
    config.validate()?;
    let mut curve = LearningCurve::default();
    curve.push(0, mean_loss(model, train)?, order_accuracy(model, test)?);
    on_epoch(curve.records.last().expect("just pushed"));
    for epoch in 1..=config.epochs {
        let loss = train_epoch(model, train, config, rng)?;
        curve.push(epoch, loss, order_accuracy(model, test)?);
        on_epoch(curve.records.last().expect("just pushed"));
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub best: Vec<f64>,
    pub mean: f64,
    pub ci95_halfwidth: f64,
    /// Mean best-so-far accuracy per epoch across runs.
    pub mean_curve: Vec<f64>,
    /// 95% half-width of the per-epoch mean.
    pub curve_ci95: Vec<f64>,
}

/// Mean and Student-t 95% half-width `t(0.975, n−1)·s/√n`.
pub fn mean_ci95(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientRuns(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Ok((mean, t * (var / n as f64).sqrt()))
}

pub fn aggregate_runs(curves: &[LearningCurve]) -> Result<RunSummary> {
    if curves.len() < 2 {
        return Err(Error::InsufficientRuns(curves.len()));
    }
    let best: Vec<f64> = curves.iter().map(LearningCurve::best).collect();
    let (mean, ci95_halfwidth) = mean_ci95(&best)?;
    let epochs = curves.iter().map(|c| c.records.len()).min().unwrap_or(0);
    let (mut mean_curve, mut curve_ci95) = (Vec::with_capacity(epochs), Vec::with_capacity(epochs));
    for e in 0..epochs {
        let column: Vec<f64> = curves.iter().map(|c| c.records[e].best_so_far).collect();
        let (m, h) = mean_ci95(&column)?;
        mean_curve.push(m);
        curve_ci95.push(h);
    }
    Ok(RunSummary {
        best,
        mean,
        ci95_halfwidth,
        mean_curve,
        curve_ci95,
    })
}

/// Trained parameters with enough context to rebuild the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// `"quantum"` or a classical head name.
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_qubits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    pub theta: Vec<f64>,
    pub seed: u64,
    pub run: usize,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub const CURVE_HEADER: &str = "run,epoch,train_mse,test_order_accuracy,best_so_far";

/// Renders curves as CSV under [`CURVE_HEADER`].
pub fn format_curves<'a>(curves: impl IntoIterator<Item = (usize, &'a LearningCurve)>) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for (run, curve) in curves {
        for r in &curve.records {
            writeln!(
                out,
                "{run},{},{},{},{}",
                r.epoch, r.train_mse, r.test_order_accuracy, r.best_so_far
            )
            .expect("writing to a String");
        }
    }
    out
}

pub fn write_curves<'a>(path: &Path, curves: impl IntoIterator<Item = (usize, &'a LearningCurve)>) -> Result<()> {
    fs::write(path, format_curves(curves)).map_err(|e| Error::io(path, e))
}

/// Parses a curve file back into `(run, curve)` pairs ordered by run.
pub fn read_curves(path: &Path) -> Result<Vec<(usize, LearningCurve)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curves(&text)
}

pub fn parse_curves(text: &str) -> Result<Vec<(usize, LearningCurve)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CURVE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{CURVE_HEADER}`"),
            })
        }
    }
    let mut runs: Vec<(usize, LearningCurve)> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        let int = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
        let float = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let run = int(fields[0])?;
        let record = EpochRecord {
            epoch: int(fields[1])?,
            train_mse: float(fields[2])?,
            test_order_accuracy: float(fields[3])?,
            best_so_far: float(fields[4])?,
        };
        match runs.iter_mut().find(|(r, _)| *r == run) {
            Some((_, c)) => c.records.push(record),
            None => runs.push((run, LearningCurve { records: vec![record] })),
        }
    }
    runs.sort_by_key(|(r, _)| *r);
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edm::similarity;

    struct Truth;

    impl SimilarityModel for Truth {
        type Embedding = NucleotideSequence;
        fn embed(&self, seq: &NucleotideSequence) -> Result<NucleotideSequence> {
            Ok(seq.clone())
        }
        fn compare(&self, x: &NucleotideSequence, y: &NucleotideSequence) -> f64 {
            similarity(x, y).unwrap()
        }
    }

    struct Constant;

    impl SimilarityModel for Constant {
        type Embedding = ();
        fn embed(&self, _: &NucleotideSequence) -> Result<()> {
            Ok(())
        }
        fn compare(&self, _: &(), _: &()) -> f64 {
            0.5
        }
    }

    /// `K = w` for every pair: a one-parameter toy for the SGD plumbing.
    struct Scalar(f64);

    impl SimilarityModel for Scalar {
        type Embedding = ();
        fn embed(&self, _: &NucleotideSequence) -> Result<()> {
            Ok(())
        }
        fn compare(&self, _: &(), _: &()) -> f64 {
            self.0
        }
    }

    impl TrainableModel for Scalar {
        fn parameters(&self) -> Vec<f64> {
            vec![self.0]
        }
        fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
            self.0 = flat[0];
            Ok(())
        }
        fn value_and_gradient(&self, _: &NucleotideSequence, _: &NucleotideSequence) -> Result<(f64, Vec<f64>)> {
            Ok((self.0, vec![1.0]))
        }
    }

    fn seq(s: &str) -> NucleotideSequence {
        s.parse().unwrap()
    }

    fn triplets() -> Vec<LabeledTriplet> {
        crate::dataset::generate_triplets(5, 30, 5).unwrap()
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(0.5, 0.5), 0.0);
        assert_eq!(mse_loss(1.0, 0.75), 0.0625);
        let pairs: Vec<LabeledPair> = [0.1, 0.4, 0.9]
            .iter()
            .map(|&t| LabeledPair { x: seq("A"), y: seq("A"), target: t })
            .collect();
        let per_pair: f64 = pairs.iter().map(|p| mse_loss(0.5, p.target)).sum::<f64>() / 3.0;
        assert!((mean_loss(&Scalar(0.5), &pairs).unwrap() - per_pair).abs() < 1e-15);
    }

    #[test]
    fn order_accuracy_extremes() {
        let t = triplets();
        assert_eq!(order_accuracy(&Truth, &t).unwrap(), 1.0);
        assert_eq!(order_accuracy(&Constant, &t).unwrap(), 0.0);
    }

    #[test]
    fn order_accuracy_rejects_ties() {
        let mut t = triplets();
        t[3].d_ac = t[3].d_ab;
        assert!(matches!(order_accuracy(&Truth, &t), Err(Error::GroundTruthTie { index: 3, .. })));
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let pairs = crate::dataset::training_pairs(&triplets());
        let config = TrainingConfig { learning_rate: 0.0, ..TrainingConfig::default() };
        let mut model = Scalar(0.3);
        train_epoch(&mut model, &pairs, &config, &mut config.run_rng(0)).unwrap();
        assert_eq!(model.0, 0.3);
    }

    #[test]
    fn sgd_moves_toward_the_mean_target() {
        let pairs: Vec<LabeledPair> = (0..10)
            .map(|_| LabeledPair { x: seq("A"), y: seq("A"), target: 0.8 })
            .collect();
        let config = TrainingConfig { learning_rate: 0.1, batch_size: 10, ..TrainingConfig::default() };
        let mut model = Scalar(0.0);
        let loss = train_epoch(&mut model, &pairs, &config, &mut config.run_rng(0)).unwrap();
        assert!((loss - 0.64).abs() < 1e-12);
        // one full batch: θ ← 0 − 0.1·2·(0 − 0.8)
        assert!((model.0 - 0.16).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let pairs = vec![LabeledPair { x: seq("A"), y: seq("A"), target: 0.5 }];
        let config = TrainingConfig::default();
        let mut model = Scalar(f64::NAN);
        assert!(matches!(
            train_epoch(&mut model, &pairs, &config, &mut config.run_rng(0)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn zero_epochs_leaves_initial_record() {
        let t = triplets();
        let pairs = crate::dataset::training_pairs(&t);
        let config = TrainingConfig { epochs: 0, ..TrainingConfig::default() };
        let curve = train_run(&mut Scalar(0.5), &config, &mut config.run_rng(0), &pairs, &t, |_| {}).unwrap();
        assert_eq!(curve.records.len(), 1);
        assert_eq!(curve.records[0].epoch, 0);
    }

    #[test]
    fn best_so_far_is_running_max() {
        let mut c = LearningCurve::default();
        for (e, a) in [0.5, 0.7, 0.6, 0.8, 0.75].into_iter().enumerate() {
            c.push(e, 0.0, a);
        }
        let best: Vec<f64> = c.records.iter().map(|r| r.best_so_far).collect();
        assert_eq!(best, vec![0.5, 0.7, 0.7, 0.8, 0.8]);
        assert_eq!(c.best(), 0.8);
    }

    #[test]
    fn aggregate_examples() {
        let curve = |accs: &[f64]| {
            let mut c = LearningCurve::default();
            for (e, &a) in accs.iter().enumerate() {
                c.push(e, 0.0, a);
            }
            c
        };
        let same = aggregate_runs(&[curve(&[0.5, 0.7]), curve(&[0.5, 0.7])]).unwrap();
        assert_eq!(same.ci95_halfwidth, 0.0);
        assert_eq!(same.mean, 0.7);

        let two = aggregate_runs(&[curve(&[0.7]), curve(&[0.8])]).unwrap();
        assert!((two.mean - 0.75).abs() < 1e-12);
        // t(0.975, 1) = 12.7062; s = 0.0707; s/√2 = 0.05
        assert!((two.ci95_halfwidth - 12.706_204_736 * 0.05).abs() < 1e-6);

        assert!(matches!(aggregate_runs(&[curve(&[0.5])]), Err(Error::InsufficientRuns(1))));
    }

    #[test]
    fn curve_csv_round_trip() {
        let mut a = LearningCurve::default();
        a.push(0, 0.25, 0.5);
        a.push(1, 0.125, 0.53125);
        let mut b = LearningCurve::default();
        b.push(0, 0.3, 0.49);
        let text = format_curves([(0, &a), (1, &b)]);
        assert!(text.starts_with(CURVE_HEADER));
        let parsed = parse_curves(&text).unwrap();
        assert_eq!(parsed, vec![(0, a), (1, b)]);
        assert!(matches!(parse_curves("nope\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_curves(&format!("{CURVE_HEADER}\n0,1,x,0.5,0.5\n")),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let ck = Checkpoint {
            model: "quantum".into(),
            num_qubits: Some(8),
            layers: Some(2),
            theta: vec![0.1, -0.2, 0.3, 0.4, 0.5, -3.0],
            seed: 7,
            run: 1,
            epoch: 100,
        };
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"num_qubits\": 8"));
    }
}
