//! `ldat`: stage-wise driver for latent domain discovery and domain-aware
//! network training.
//!
//! Every stage reads its inputs from files and writes its outputs atomically.
//! Stages are deterministic: rerunning one with the same inputs, seed and
//! thread count reproduces its artifacts byte for byte. Errors are reported
//! on standard error as one JSON line, `{"error": kind, "message": ...}`,
//! with exit code 2 for usage problems and 1 for data problems.

mod commands;
mod data;
mod error;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ldat_core::corpus::FeatureFormat;

use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "ldat", version, about = "Latent acoustic domain discovery and domain-aware training")]
struct Cli {
    /// TOML manifest with a global `seed` and per-stage tables of flag values.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Seed for every random choice of the stage [default: manifest `seed`, else 0].
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads [default: manifest `threads`, else 1]. Results do not
    /// depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic domain-shifted frame classification corpus.
    Synth(SynthArgs),
    /// Train a diagonal GMM codebook by mix-up on pooled feature frames.
    TrainGmm(TrainGmmArgs),
    /// Map every frame to its most likely GMM component.
    Quantize(QuantizeArgs),
    /// Fit an LDA model on bags-of-sounds by variational EM.
    TrainLda(TrainLdaArgs),
    /// Infer per-document domain posteriors and MAP domains.
    Assign(AssignArgs),
    /// Print the average domain entropy of a model over a corpus.
    Entropy(EntropyArgs),
    /// Keep documents whose domain tuple under two models is frequent.
    Filter(FilterArgs),
    /// Train a frame classifier, optionally with UBIC domain inputs.
    AugmentTrain(AugmentTrainArgs),
    /// Report frame accuracy of a trained classifier.
    Eval(EvalArgs),
    /// Per-group domain distribution table (top-N domains plus "other").
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for FeatureFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => FeatureFormat::Jsonl,
            FormatArg::Csv => FeatureFormat::Csv,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output feature file (.jsonl or .csv).
    #[arg(long)]
    out_features: Option<PathBuf>,
    /// Output frame labels (jsonl).
    #[arg(long)]
    out_labels: Option<PathBuf>,
    #[arg(long)]
    format: Option<FormatArg>,
    /// Number of documents [default: 400].
    #[arg(long)]
    docs: Option<usize>,
    /// Frames per document [default: 50].
    #[arg(long)]
    frames_per_doc: Option<usize>,
    /// Latent domains [default: 4].
    #[arg(long)]
    domains: Option<usize>,
    /// Frame classes [default: 8].
    #[arg(long)]
    classes: Option<usize>,
    /// Feature dimension [default: 4].
    #[arg(long)]
    dim: Option<usize>,
    /// Seed of the task itself (class means, domain shifts); use the same
    /// value for train and test sets [default: 0].
    #[arg(long)]
    task_seed: Option<u64>,
    /// Std. dev. of class means [default: 1.5].
    #[arg(long)]
    class_spread: Option<f64>,
    /// Std. dev. of domain shifts [default: 1.5].
    #[arg(long)]
    domain_spread: Option<f64>,
    /// Frame noise std. dev. [default: 1.0].
    #[arg(long)]
    noise_std: Option<f64>,
    /// Document id prefix [default: "utt"].
    #[arg(long)]
    id_prefix: Option<String>,
}

#[derive(Args, Debug)]
struct TrainGmmArgs {
    /// Feature file (.jsonl or .csv).
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    format: Option<FormatArg>,
    /// Number of Gaussian components V [default: 64].
    #[arg(long)]
    components: Option<usize>,
    /// EM iterations after each split [default: 4].
    #[arg(long)]
    iters_per_split: Option<usize>,
    /// Maximum final EM iterations [default: 50].
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative log-likelihood change that ends final EM [default: 1e-6].
    #[arg(long)]
    tol: Option<f64>,
    /// Variance floor as a fraction of the global variance [default: 1e-4].
    #[arg(long)]
    variance_floor: Option<f64>,
    /// Output model (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct QuantizeArgs {
    /// GMM model (JSON).
    #[arg(long)]
    gmm: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    format: Option<FormatArg>,
    /// Output symbol sequences (jsonl).
    #[arg(long)]
    out_symbols: Option<PathBuf>,
    /// Output bags-of-sounds (jsonl).
    #[arg(long)]
    out_bags: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainLdaArgs {
    /// Bags-of-sounds (jsonl).
    #[arg(long)]
    bags: Option<PathBuf>,
    /// Number of domains K.
    #[arg(long)]
    k: Option<usize>,
    /// Symmetric Dirichlet parameter [default: 1/K].
    #[arg(long)]
    alpha: Option<f64>,
    /// Pseudo-count added to every topic-symbol cell; 0 disables [default: 1e-3].
    #[arg(long)]
    smoothing: Option<f64>,
    /// Relative corpus-bound change that ends EM [default: 1e-4].
    #[arg(long)]
    em_tol: Option<f64>,
    /// [default: 50]
    #[arg(long)]
    max_em_iters: Option<usize>,
    /// Relative gamma change that ends per-document inference [default: 1e-5].
    #[arg(long)]
    gamma_tol: Option<f64>,
    /// [default: 100]
    #[arg(long)]
    max_e_iters: Option<usize>,
    /// Output model (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InferenceArgs {
    /// Remove the prior pseudo-counts from gamma before normalizing.
    #[arg(long)]
    subtract_prior: bool,
    /// [default: 1e-5]
    #[arg(long)]
    gamma_tol: Option<f64>,
    /// [default: 100]
    #[arg(long)]
    max_e_iters: Option<usize>,
}

#[derive(Args, Debug)]
struct AssignArgs {
    /// LDA model (JSON).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    bags: Option<PathBuf>,
    #[command(flatten)]
    inference: InferenceArgs,
    /// Output assignments (jsonl).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum UnitArg {
    Bits,
    Nats,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    /// LDA model (JSON); used with --bags.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    bags: Option<PathBuf>,
    /// Precomputed assignments instead of --model/--bags.
    #[arg(long, conflicts_with_all = ["model", "bags"])]
    assignments: Option<PathBuf>,
    /// [default: bits]
    #[arg(long)]
    unit: Option<UnitArg>,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Args, Debug)]
struct FilterArgs {
    /// Assignments of the first model; its weights are used.
    #[arg(long)]
    assign_a: Option<PathBuf>,
    /// Assignments of the second model.
    #[arg(long)]
    assign_b: Option<PathBuf>,
    /// Target kept weight as a fraction of the total.
    #[arg(long, conflicts_with = "target_weight")]
    target_frac: Option<f64>,
    /// Target kept weight in absolute units (frames).
    #[arg(long)]
    target_weight: Option<f64>,
    /// Output kept ids (jsonl).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional tuple histogram (CSV).
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum ActivationArg {
    Sigmoid,
    Relu,
}

#[derive(Args, Debug)]
struct AugmentTrainArgs {
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    format: Option<FormatArg>,
    /// Frame labels (jsonl).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Domain assignments; when given, UBIC vectors are appended to the input.
    #[arg(long)]
    assignments: Option<PathBuf>,
    /// Start from this network. A baseline is widened with zero domain
    /// weights when --assignments is given.
    #[arg(long)]
    init_from: Option<PathBuf>,
    /// Train only on documents listed here (e.g. `filter` output).
    #[arg(long)]
    keep: Option<PathBuf>,
    /// Hidden layer widths, comma separated [default: 64,64].
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// [default: sigmoid]
    #[arg(long)]
    activation: Option<ActivationArg>,
    /// Number of classes [default: largest label + 1].
    #[arg(long)]
    classes: Option<usize>,
    /// [default: 20]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 0.1]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// [default: 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Fraction of documents held out for cross-validation [default: 0.1].
    #[arg(long)]
    cv_frac: Option<f64>,
    /// Keep the learning rate fixed even when held-out loss rises.
    #[arg(long)]
    no_halving: bool,
    /// Output network (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch metrics (CSV).
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Trained network (JSON).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    format: Option<FormatArg>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Domain assignments; required for domain-aware networks.
    #[arg(long)]
    assignments: Option<PathBuf>,
    /// Also write the report (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum GroupBy {
    /// Group by the documents' `group` field.
    Label,
    /// One group, `all`.
    None,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    assignments: Option<PathBuf>,
    /// jsonl with `id` and `group` per document (features or bags).
    #[arg(long)]
    groups_from: Option<PathBuf>,
    /// [default: label when --groups-from is given, else none]
    #[arg(long)]
    group_by: Option<GroupBy>,
    /// Domains reported individually [default: 16].
    #[arg(long)]
    top_n: Option<usize>,
    /// Output table (CSV `group,domain,weight`).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Settings shared by every stage.
pub struct Context {
    manifest: Manifest,
    seed: u64,
}

fn setup(cli: &Cli) -> CliResult<Context> {
    let manifest = match &cli.manifest {
        Some(p) => Manifest::load(p)?,
        None => Manifest::default(),
    };
    let seed = match cli.seed {
        Some(s) => s,
        None => manifest.seed()?.unwrap_or(0),
    };
    let threads = match cli.threads {
        Some(t) => t,
        None => manifest.threads()?.unwrap_or(1),
    };
    if threads == 0 {
        return Err(CliError::usage("--threads must be >= 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    Ok(Context { manifest, seed })
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = setup(&cli)?;
    match cli.command {
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::TrainGmm(a) => commands::train_gmm(&ctx, a),
        Command::Quantize(a) => commands::quantize(&ctx, a),
        Command::TrainLda(a) => commands::train_lda(&ctx, a),
        Command::Assign(a) => commands::assign(&ctx, a),
        Command::Entropy(a) => commands::entropy(&ctx, a),
        Command::Filter(a) => commands::filter(&ctx, a),
        Command::AugmentTrain(a) => commands::augment_train(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    eprintln!("{}", CliError::usage(e.to_string()).to_json_line());
                    ExitCode::from(2)
                }
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code())
        }
    }
}
