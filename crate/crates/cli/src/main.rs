//! `dnaqk`: dataset generation, training, and reporting for the DNA
//! quantum kernel experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use dna_qkernel::dataset::{self, LabeledTriplet, DEFAULT_EDM_BUDGET};
use dna_qkernel::edm::{self, MAX_EXACT_LENGTH};
use dna_qkernel::training::{self, Checkpoint, LearningCurve, TrainableModel, TrainingConfig};
use dna_qkernel::{ClassicalKernelModel, HeadKind, KernelParams, NucleotideSequence, QuantumKernel};

#[derive(Parser)]
#[command(name = "dnaqk", version, about = "Permutation-invariant quantum kernel for DNA similarity")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "DNAQK_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled triplet file.
    GenData {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3200)]
        count: usize,
        #[arg(long, default_value_t = 8)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the quantum kernel.
    TrainQuantum {
        #[arg(long, default_value_t = 24)]
        layers: usize,
        #[command(flatten)]
        common: TrainArgs,
    },
    /// Train a classical deep-kernel baseline.
    TrainClassical {
        #[arg(long, value_parser = parse_head)]
        kernel: HeadKind,
        #[command(flatten)]
        common: TrainArgs,
    },
    /// Print the exact edit distance with moves.
    Edm {
        #[arg(long)]
        a: NucleotideSequence,
        #[arg(long)]
        b: NucleotideSequence,
        /// Search node budget.
        #[arg(long, default_value_t = DEFAULT_EDM_BUDGET)]
        budget: usize,
    },
    /// Summarize curve files as mean best order accuracy ± 95% CI.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        curves: Vec<PathBuf>,
        /// Write the averaged best-so-far curves here instead of stdout.
        #[arg(long)]
        out_plot: Option<PathBuf>,
    },
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_curves: PathBuf,
    /// Directory for one checkpoint per run.
    #[arg(long)]
    out_checkpoints: Option<PathBuf>,
}

fn parse_head(s: &str) -> std::result::Result<HeadKind, String> {
    s.parse().map_err(|e: dna_qkernel::Error| e.to_string())
}

#[derive(Serialize)]
struct FileEntry {
    path: PathBuf,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    version: &'static str,
    config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parameters: Option<usize>,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<serde_json::Value>,
    timings: serde_json::Value,
}

fn file_entry(path: &Path) -> Result<FileEntry> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileEntry {
        path: path.to_path_buf(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut p = output.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

fn write_manifest(output: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = manifest_path(output);
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::FAILURE;
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData {
            seed,
            count,
            length,
            out,
        } => gen_data(seed, count, length, &out),
        Command::TrainQuantum { layers, common } => {
            let config = training_config(&common, layers)?;
            let label = format!("QKernel-{layers}");
            train(&common, &config, &label, "train-quantum", |rng| {
                Ok(QuantumKernel::new(KernelParams::random(rng, layers)?))
            })
        }
        Command::TrainClassical { kernel, common } => {
            let config = training_config(&common, 1)?;
            let label = format!("CKernel-{kernel}");
            train(&common, &config, &label, "train-classical", |rng| {
                Ok(ClassicalKernelModel::init(kernel, rng))
            })
        }
        Command::Edm { a, b, budget } => {
            println!("{}", edm::edm_exact(&a, &b, Some(budget))?);
            Ok(())
        }
        Command::Report { curves, out_plot } => report(&curves, out_plot.as_deref()),
    }
}

fn gen_data(seed: u64, count: usize, length: usize, out: &Path) -> Result<()> {
    if length > MAX_EXACT_LENGTH {
        bail!("--length {length} exceeds the exact edit-distance limit of {MAX_EXACT_LENGTH}");
    }
    let start = Instant::now();
    let triplets = dataset::generate_triplets(seed, count, length)?;
    write_atomic(out, dataset::format_triplets(&triplets)?.as_bytes())?;
    let manifest = Manifest {
        command: "gen-data",
        version: env!("CARGO_PKG_VERSION"),
        config: json!({ "seed": seed, "count": count, "length": length, "out": out }),
        model: None,
        parameters: None,
        inputs: vec![],
        outputs: vec![file_entry(out)?],
        summary: None,
        timings: json!({ "total_seconds": start.elapsed().as_secs_f64() }),
    };
    write_manifest(out, &manifest)?;
    eprintln!("wrote {count} triplets to {}", out.display());
    Ok(())
}

fn training_config(args: &TrainArgs, num_layers: usize) -> Result<TrainingConfig> {
    let config = TrainingConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        num_layers,
        batch_size: args.batch,
        runs: args.runs,
        seed: args.seed,
    };
    config.validate()?;
    Ok(config)
}

fn load(path: &Path) -> Result<Vec<LabeledTriplet>> {
    let triplets = dataset::load_triplets(path).with_context(|| format!("loading {}", path.display()))?;
    if triplets.is_empty() {
        bail!("{} holds no triplets", path.display());
    }
    Ok(triplets)
}

fn train<M: TrainableModel>(
    args: &TrainArgs,
    config: &TrainingConfig,
    label: &str,
    command: &'static str,
    init: impl Fn(&mut ChaCha8Rng) -> dna_qkernel::Result<M> + Sync,
) -> Result<()> {
    let start = Instant::now();
    let train_set = load(&args.train)?;
    let test_set = load(&args.test)?;
    let width = train_set[0].len();
    if let Some(t) = train_set.iter().chain(&test_set).find(|t| t.len() != width) {
        bail!("mixed sequence lengths: {} and {}", width, t.len());
    }
    let pairs = dataset::training_pairs(&train_set);
    let is_quantum = command == "train-quantum";

    let results = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let run_start = Instant::now();
            let mut rng = config.run_rng(run);
            let mut model = init(&mut rng)?;
            let curve = training::train_run(&mut model, config, &mut rng, &pairs, &test_set, |_| {})?;
            eprintln!("{label} run {run}: best order accuracy {:.4}", curve.best());
            Ok((model.parameters(), curve, run_start.elapsed().as_secs_f64()))
        })
        .collect::<dna_qkernel::Result<Vec<_>>>()?;

    let curves: Vec<(usize, &LearningCurve)> = results.iter().enumerate().map(|(r, (_, c, _))| (r, c)).collect();
    write_atomic(&args.out_curves, training::format_curves(curves.iter().copied()).as_bytes())?;
    let mut outputs = vec![file_entry(&args.out_curves)?];

    if let Some(dir) = &args.out_checkpoints {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (run, (theta, _, _)) in results.iter().enumerate() {
            let ck = Checkpoint {
                model: if is_quantum { "quantum".into() } else { label.trim_start_matches("CKernel-").into() },
                num_qubits: is_quantum.then_some(width),
                layers: is_quantum.then_some(config.num_layers),
                theta: theta.clone(),
                seed: config.seed,
                run,
                epoch: config.epochs,
            };
            let path = dir.join(format!("run-{run:02}.json"));
            write_atomic(&path, (serde_json::to_string_pretty(&ck)? + "\n").as_bytes())?;
            outputs.push(file_entry(&path)?);
        }
    }

    let bests: Vec<f64> = results.iter().map(|(_, c, _)| c.best()).collect();
    let summary = match training::mean_ci95(&bests) {
        Ok((mean, half)) => {
            println!("{label}: {} ± {} over {} runs", percent(mean), percent(half), bests.len());
            json!({ "best": bests, "mean": mean, "ci95_halfwidth": half })
        }
        Err(_) => {
            let note = "confidence interval omitted: needs at least 2 runs";
            println!("{label}: {} over 1 run ({note})", percent(bests[0]));
            json!({ "best": bests, "mean": bests[0], "note": note })
        }
    };

    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: json!({ "args": args, "training": config }),
        model: Some(label.to_string()),
        parameters: Some(results[0].0.len()),
        inputs: vec![file_entry(&args.train)?, file_entry(&args.test)?],
        outputs,
        summary: Some(summary),
        timings: json!({
            "total_seconds": start.elapsed().as_secs_f64(),
            "run_seconds": results.iter().map(|r| r.2).collect::<Vec<_>>(),
        }),
    };
    write_manifest(&args.out_curves, &manifest)?;
    Ok(())
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

/// Model label from a curve file's manifest, falling back to its file stem.
fn curve_label(path: &Path) -> String {
    std::fs::read_to_string(manifest_path(path))
        .ok()
        .and_then(|text| serde_json::from_str::<serde_json::Value>(&text).ok())
        .and_then(|v| v.get("model")?.as_str().map(str::to_string))
        .unwrap_or_else(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned())
}

fn report(paths: &[PathBuf], out_plot: Option<&Path>) -> Result<()> {
    let mut table = format!("{:<16} {:>5}  {}\n", "model", "runs", "best order accuracy");
    let mut plot = String::from("model,epoch,mean_best_so_far,ci95_halfwidth\n");
    for path in paths {
        let label = curve_label(path);
        let runs: Vec<LearningCurve> = training::read_curves(path)
            .with_context(|| format!("reading {}", path.display()))?
            .into_iter()
            .map(|(_, c)| c)
            .collect();
        if runs.is_empty() {
            bail!("{} holds no runs", path.display());
        }
        if runs.len() == 1 {
            let curve = &runs[0];
            table += &format!("{label:<16} {:>5}  {} (single run, no CI)\n", 1, percent(curve.best()));
            for r in &curve.records {
                plot += &format!("{label},{},{},\n", r.epoch, r.best_so_far);
            }
            continue;
        }
        let summary = training::aggregate_runs(&runs)?;
        table += &format!(
            "{label:<16} {:>5}  {}±{}\n",
            runs.len(),
            percent(summary.mean),
            percent(summary.ci95_halfwidth)
        );
        for (epoch, (m, h)) in summary.mean_curve.iter().zip(&summary.curve_ci95).enumerate() {
            plot += &format!("{label},{epoch},{m},{h}\n");
        }
    }
    print!("{table}");
    match out_plot {
        Some(path) => write_atomic(path, plot.as_bytes())?,
        None => print!("\n{plot}"),
    }
    Ok(())
}
