//! `sord`: generate synthetic data, train and sweep encoding schemes,
//! summarize persisted reports, run gradient oracles and print encodings.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sord_core::harness::{self, oracles, train_run, Scheme};
use sord_core::{
    encode_onehot, encode_sord, enumerate_orderings, generate, materialize, DistanceSpec,
    EncodingParams, ExperimentConfig, Geometry, LabelMatrix, RankAssignment,
};

/// Writes to stdout, surfacing a closed pipe as an error instead of a panic.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        write!(std::io::stdout().lock(), $($arg)*)?
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        writeln!(std::io::stdout().lock(), $($arg)*)?
    }};
}

/// Largest relative error accepted by `gradcheck`.
const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(
    name = "sord",
    version,
    about = "Ordinal soft-label encodings and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (directory for runs, file for datasets).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as text.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train a single (scheme, size, seed) cell and write its report.
    Train {
        #[command(flatten)]
        common: Common,
        /// Scheme to train; defaults to the first one in the config.
        #[arg(long)]
        scheme: Option<Scheme>,
        /// Training-set size; defaults to the largest configured size.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train the full (scheme, size, seed) grid and write reports and summaries.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild the summary from reports already written to an output directory.
    Report {
        /// Directory given as `--out` to `sweep`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the finite-difference gradient checks.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a label matrix.
    Encode(EncodeArgs),
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    scheme: Scheme,
    #[arg(long)]
    k: usize,
    /// Distance scale for SORD schemes and `plsord` (`inf` allowed).
    #[arg(long)]
    s: Option<f64>,
    /// Comma-separated class ranks; defaults to equal spacing.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<f64>>,
    /// Pinned target entry for `learned` (encoding at zero logits).
    #[arg(long, default_value_t = sord_core::learned_codec::DEFAULT_TARGET_MASS)]
    target_mass: f64,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_ref()
        .context("this command needs --config <path>")?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        config.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn cmd_generate(common: &Common) -> Result<()> {
    let config = match &common.config {
        Some(_) => load_config(common)?,
        None => ExperimentConfig::default(),
    };
    let seed = common.seed.unwrap_or(config.seeds[0]);
    let data = generate(&config.synth_config(seed))?;
    match &common.out {
        Some(path) => {
            data.save(path)?;
            eprintln!("wrote {} samples to {}", data.len(), path.display());
        }
        None => out!("{}", data.to_text()),
    }
    Ok(())
}

fn cmd_train(common: &Common, scheme: Option<Scheme>, size: Option<usize>) -> Result<()> {
    let config = load_config(common)?;
    let scheme = scheme.unwrap_or(config.schemes[0]);
    let size = size.unwrap_or(*config.sizes.last().expect("validated non-empty"));
    let seed = config.seeds[0];
    let out = train_run(&config, scheme, size, seed)?;
    let dir = harness::runs_dir(&config.out_dir);
    let path = out.report.save_in(&dir)?;
    if config.save_checkpoints {
        out.best_model.save(&path.with_extension("ckpt"))?;
    }
    let r = &out.report;
    outln!(
        "{} size {} seed {}: {:?}, best step {}, validation {:.4}, test {:.4}",
        r.label,
        r.size,
        r.seed,
        r.status,
        r.best_step,
        r.best_validation_accuracy,
        r.test_accuracy
    );
    outln!("report: {}", path.display());
    Ok(())
}

fn cmd_sweep(common: &Common) -> Result<()> {
    let config = load_config(common)?;
    let reports = harness::run_experiment(&config)?;
    let failed = reports.iter().filter(|r| !r.is_completed()).count();
    outln!(
        "{} runs ({} failed) written to {}",
        reports.len(),
        failed,
        harness::runs_dir(&config.out_dir).display()
    );
    out!("{}", harness::sweep_summary(&reports)?.to_csv());
    Ok(())
}

fn cmd_report(out: &Path) -> Result<()> {
    let table = harness::summarize_dir(out)?;
    out!("{}", table.to_csv());
    Ok(())
}

fn cmd_gradcheck(seed: u64) -> Result<()> {
    let results = oracles::run_all(seed)?;
    let mut worst: f64 = 0.0;
    for r in &results {
        outln!(
            "{:<24} {:>5} params  max relative error {:.3e}",
            r.name,
            r.parameters,
            r.relative_error
        );
        worst = worst.max(r.relative_error);
    }
    if worst >= GRADCHECK_TOLERANCE {
        bail!("gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:.0e}");
    }
    Ok(())
}

fn sord_matrix(args: &EncodeArgs, geometry: Geometry, scale: f64) -> Result<LabelMatrix> {
    let ranks = match &args.ranks {
        Some(r) => RankAssignment::new(r.clone(), geometry)?,
        None if geometry == Geometry::Circular => RankAssignment::equally_spaced_circular(args.k)?,
        None => RankAssignment::equally_spaced_linear(args.k)?,
    };
    if ranks.num_classes() != args.k {
        bail!(
            "--ranks has {} entries but --k is {}",
            ranks.num_classes(),
            args.k
        );
    }
    Ok(encode_sord(&ranks, &DistanceSpec::new(geometry, scale)?)?)
}

fn cmd_encode(args: &EncodeArgs) -> Result<()> {
    let scale = || {
        args.s
            .with_context(|| format!("missing required key `s` for {}", args.scheme))
    };
    match args.scheme {
        Scheme::Onehot => out!("{}", encode_onehot(args.k)?.to_text()),
        Scheme::SordLinear => out!(
            "{}",
            sord_matrix(args, Geometry::Linear, scale()?)?.to_text()
        ),
        Scheme::SordCircular => {
            out!(
                "{}",
                sord_matrix(args, Geometry::Circular, scale()?)?.to_text()
            )
        }
        Scheme::Plsord => {
            let positions = match &args.ranks {
                Some(p) => p.clone(),
                None => RankAssignment::equally_spaced_circular(args.k)?
                    .ranks()
                    .to_vec(),
            };
            let set = enumerate_orderings(args.k, &positions, Geometry::Circular)?;
            let encodings = set.encodings(&DistanceSpec::circular(scale()?)?)?;
            for (i, (c, m)) in set.candidates().iter().zip(&encodings).enumerate() {
                let ranks: Vec<String> = c.ranks().iter().map(|r| r.to_string()).collect();
                outln!("# candidate {i}: {}", ranks.join(" "));
                out!("{}", m.to_text());
            }
        }
        Scheme::Learned => {
            let params = EncodingParams::zeros(args.k, args.target_mass)?;
            out!("{}", materialize(&params).to_text());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Generate { common } => cmd_generate(common),
        Command::Train {
            common,
            scheme,
            size,
        } => cmd_train(common, *scheme, *size),
        Command::Sweep { common } => cmd_sweep(common),
        Command::Report { out } => cmd_report(out),
        Command::Gradcheck { seed } => cmd_gradcheck(*seed),
        Command::Encode(args) => cmd_encode(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // A reader that closed early, as with `| head`, is not a failure.
        Err(e)
            if e.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
