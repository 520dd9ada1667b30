use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgeflow::harness::{self, BundleSpec, ExperimentKind, ExperimentOutput};
use edgeflow::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Edge-learning simulator: federated and centralized experiments over
/// simulated wireless links.
#[derive(Parser, Debug)]
#[command(name = "edgeflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Codebook utilities.
    #[command(subcommand)]
    Codebook(CodebookCommand),
    /// Run an AirComp sweep config and write the result table.
    Sweep(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output path in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum CodebookCommand {
    /// Build a codebook bundle for gradients of a given length.
    Build(BuildArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BundleKind {
    /// Norm, block and hinge codebooks in one file.
    Bundle,
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// Gradient length.
    #[arg(long)]
    dim: usize,
    /// Number of blocks M.
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    /// Bit widths B_rho,B_s,B_h.
    #[arg(long, value_delimiter = ',', default_values_t = [4u8, 5, 4])]
    bits: Vec<u8>,
    #[arg(long, value_enum, default_value_t = BundleKind::Bundle)]
    kind: BundleKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Headerless CSV of hinge vectors (length M) for Lloyd training.
    #[arg(long)]
    train_from: Option<PathBuf>,
    /// Range lo,hi of the gradient-norm quantizer.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0])]
    norm_range: Vec<f64>,
}

fn load(args: &RunArgs) -> Result<(harness::ExperimentConfig, PathBuf)> {
    let mut cfg = harness::load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config("no output path: pass --out or set `output` in the config".into()))?;
    Ok((cfg, out))
}

fn run(args: &RunArgs, sweep_only: bool) -> Result<()> {
    let (cfg, out) = load(args)?;
    if sweep_only && cfg.kind != ExperimentKind::AircompSweep {
        return Err(Error::Config(format!(
            "`sweep` needs kind = \"aircomp_sweep\", config has {:?}",
            cfg.kind.as_str()
        )));
    }
    let output = harness::run_experiment(&cfg)?;
    if let ExperimentOutput::Rounds {
        early_stopped: true,
        metrics,
    } = &output
    {
        eprintln!("early stop: device pools exhausted after {} rounds", metrics.len());
    }
    harness::write_output(&output, &out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn build(args: &BuildArgs) -> Result<()> {
    let BundleKind::Bundle = args.kind;
    if args.bits.len() != 3 {
        return Err(Error::Config(format!(
            "--bits takes B_rho,B_s,B_h, got {} values",
            args.bits.len()
        )));
    }
    if args.norm_range.len() != 2 {
        return Err(Error::Config(format!(
            "--norm-range takes lo,hi, got {} values",
            args.norm_range.len()
        )));
    }
    let (lo, hi) = (args.norm_range[0], args.norm_range[1]);
    let spec = BundleSpec {
        dim: args.dim,
        blocks: args.blocks,
        bits_norm: args.bits[0],
        bits_block: args.bits[1],
        bits_hinge: args.bits[2],
        norm_range: (lo, hi),
    };
    let training = args.train_from.as_deref().map(harness::read_hinge_csv).transpose()?;
    let bundle = harness::build_bundle(&spec, training.as_deref(), args.seed).map_err(|e| match e {
        Error::InvalidInput(msg) | Error::DimensionMismatch(msg) => Error::Config(msg),
        other => other,
    })?;
    harness::write_output(&ExperimentOutput::Codebook(bundle), &args.out)?;
    println!(
        "{}: M={} L={} bits={}/{}/{} ({:.4} bits/coefficient)",
        args.out.display(),
        spec.blocks,
        spec.block_len(),
        spec.bits_norm,
        spec.bits_block,
        spec.bits_hinge,
        spec.payload_bits() as f64 / spec.dim as f64
    );
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

fn report(path: Option<&Path>, e: &Error) {
    match path {
        Some(p) => eprintln!("error ({}): {e}", p.display()),
        None => eprintln!("error: {e}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EDGEFLOW_LOG", "warn")).init();
    let cli = Cli::parse();
    let (result, path) = match &cli.command {
        Command::Run(args) => (run(args, false), Some(args.config.as_path())),
        Command::Sweep(args) => (run(args, true), Some(args.config.as_path())),
        Command::Codebook(CodebookCommand::Build(args)) => (build(args), None),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(path, &e);
            ExitCode::from(exit_code(&e))
        }
    }
}
