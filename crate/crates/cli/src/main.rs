//! `otproto`: synthetic data, training, inference, evaluation and exports.

mod banks;
mod eval;
mod export;
mod infer;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use otproto::TrainConfig;

#[derive(Parser, Debug)]
#[command(name = "otproto", version, about = "Prototype-based anomaly detection with entropic optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic dataset with planted anomalies.
    Synth(synth::SynthArgs),
    /// Learn global and local prototype banks for every scale.
    Train(TrainArgs),
    /// Score test grids and write one anomaly map per image.
    Infer(infer::InferArgs),
    /// Compute AU-ROC and AU-sPRO from anomaly maps and masks.
    Eval(eval::EvalArgs),
    /// For every prototype, the closest training feature.
    ExportProtos(export::ExportArgs),
    /// Per-cell nearest prototypes and restore recipes for test images.
    Assignments(export::AssignArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset manifest (TOML).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for checkpoints and the training log.
    #[arg(long)]
    pub out: PathBuf,
    /// `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Continue from the checkpoints in --out.
    #[arg(long)]
    pub resume: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[command(flatten)]
    pub params: ConfigFlags,
}

/// One flag per training config key.
#[derive(Args, Debug, Default)]
pub struct ConfigFlags {
    /// Prototypes per lattice cell [default: 16]
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// EMA rate; 1 freezes the prototypes [default: 0.95]
    #[arg(long = "eta")]
    pub eta: Option<f64>,
    /// Alpha of the local bank [default: 0.3]
    #[arg(long = "alpha_local")]
    pub alpha_local: Option<f64>,
    /// Entropic regularization [default: 0.01]
    #[arg(long = "epsilon")]
    pub epsilon: Option<f64>,
    /// Sinkhorn iteration cap [default: 100]
    #[arg(long = "max_sinkhorn_iters")]
    pub max_sinkhorn_iters: Option<usize>,
    /// Marginal residual at which Sinkhorn stops [default: 1e-6]
    #[arg(long = "marginal_tol")]
    pub marginal_tol: Option<f64>,
    /// Log-domain Sinkhorn (false = multiplicative) [default: true]
    #[arg(long = "log_domain")]
    pub log_domain: Option<bool>,
    /// Anneal epsilon inside each Sinkhorn solve [default: false]
    #[arg(long = "eps_scaling")]
    pub eps_scaling: Option<bool>,
    /// Training epochs [default: 50]
    #[arg(long = "epochs")]
    pub epochs: Option<usize>,
    /// Grids per batch [default: 64]
    #[arg(long = "batch_size")]
    pub batch_size: Option<usize>,
    /// Seed for initialization and shuffling [default: 0]
    #[arg(long = "rng_seed")]
    pub rng_seed: Option<u64>,
    /// Mean of the initial prototype weights [default: 0]
    #[arg(long = "init_mean")]
    pub init_mean: Option<f64>,
    /// Std of the initial prototype weights [default: 1]
    #[arg(long = "init_std")]
    pub init_std: Option<f64>,
    /// Zero-norm vectors: error or clamp [default: error]
    #[arg(long = "zero_vector")]
    pub zero_vector: Option<otproto::ZeroVectorPolicy>,
    /// Relative cost change that stops training early, 0 = off [default: 0]
    #[arg(long = "plateau_tol")]
    pub plateau_tol: Option<f64>,
}

impl ConfigFlags {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f.clone() {
                    cfg.$f = v;
                }
            )*};
        }
        set!(
            n,
            eta,
            alpha_local,
            epsilon,
            max_sinkhorn_iters,
            marginal_tol,
            log_domain,
            eps_scaling,
            epochs,
            batch_size,
            rng_seed,
            init_mean,
            init_std,
            zero_vector,
            plateau_tol
        );
    }
}

/// Which banks feed the anomaly map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BankChoice {
    /// Average of the global and the local bank.
    Both,
    Global,
    Local,
}

/// Builds the rayon pool used by every parallel kernel.
fn init_workers(workers: usize) -> Result<()> {
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("cannot start worker pool")?;
    }
    Ok(())
}

/// Usage and configuration problems exit with 2, everything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<otproto::Error>(),
            Some(otproto::Error::InvalidConfig(_) | otproto::Error::Manifest(_))
        )
    });
    if usage {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth::run(a),
        Command::Train(a) => {
            init_workers(a.workers)?;
            train::run(a)
        }
        Command::Infer(a) => {
            init_workers(a.workers)?;
            infer::run(a)
        }
        Command::Eval(a) => {
            init_workers(a.workers)?;
            eval::run(a)
        }
        Command::ExportProtos(a) => export::run_protos(a),
        Command::Assignments(a) => export::run_assignments(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
