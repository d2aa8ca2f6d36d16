use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use streamsketch_bench::config::{ConfigError, ExperimentConfig, ExperimentKind};
use streamsketch_bench::data::load;
use streamsketch_bench::experiments;
use streamsketch_bench::io::{write_csv, write_fvecs};
use streamsketch_bench::results::{ResultWriter, CONFIG_FILE, RESULTS_FILE};
use streamsketch_bench::BenchError;

#[derive(Parser)]
#[command(
    name = "streamsketch",
    version,
    about = "Streaming ANN and sliding-window KDE experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// S-ANN against JL over epsilon, eta and projection dimension.
    AnnCompare(RunArgs),
    /// S-ANN memory against stream length.
    AnnScaling(RunArgs),
    /// Query throughput of S-ANN and JL.
    AnnQps(RunArgs),
    /// SW-AKDE error against row count.
    KdeSketchSize(RunArgs),
    /// SW-AKDE error against window length and row count.
    KdeWindow(RunArgs),
    /// SW-AKDE against its exact-counter twin.
    KdeVsCounter(RunArgs),
    /// Writes the configured synthetic dataset to disk.
    GenSynthetic(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; omitted fields take the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for results.csv and config.json.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Large workloads instead of the desk-scale defaults.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Fvecs,
    Csv,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "fvecs")]
    format: Format,
}

fn config(args: &RunArgs, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            match kind {
                Some(k) => ExperimentConfig::from_json(&text, k, args.full_scale)?,
                None => ExperimentConfig::from_json_or(
                    &text,
                    ExperimentKind::AnnCompare,
                    args.full_scale,
                )?,
            }
        }
        None => {
            ExperimentConfig::defaults(kind.unwrap_or(ExperimentKind::AnnCompare), args.full_scale)
        }
    };
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<(), BenchError> {
    let cfg = config(args, Some(kind))?;
    let mut writer = ResultWriter::create(&args.out, &cfg)?;
    for &seed in &cfg.seeds {
        for row in experiments::run_seed(&cfg, seed)? {
            writer.push(&row)?;
        }
    }
    let n = writer.rows();
    writer.finish()?;
    eprintln!(
        "{n} rows written to {}",
        args.out.join(RESULTS_FILE).display()
    );
    Ok(())
}

fn generate(args: &GenArgs) -> Result<(), BenchError> {
    let cfg = config(&args.run, None)?;
    let seed = cfg.seeds[0];
    let stream_len = match cfg.experiment {
        ExperimentKind::AnnScaling => cfg.sizes.iter().copied().max().unwrap_or(0),
        _ => cfg.store_count,
    };
    let data = load(&cfg, seed, stream_len)?;
    let dir = &args.run.out;
    std::fs::create_dir_all(dir)?;
    let write = |name: &str, pts: &[streamsketch_core::Point]| -> Result<(), BenchError> {
        match args.format {
            Format::Fvecs => write_fvecs(&dir.join(format!("{name}.fvecs")), pts)?,
            Format::Csv => write_csv(&dir.join(format!("{name}.csv")), pts)?,
        }
        Ok(())
    };
    write("points", &data.points)?;
    write("queries", &data.queries)?;
    let json = serde_json::to_string_pretty(&cfg).map_err(std::io::Error::other)?;
    std::fs::write(dir.join(CONFIG_FILE), json + "\n")?;
    eprintln!(
        "{} points and {} queries written to {}",
        data.points.len(),
        data.queries.len(),
        Path::new(dir).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::AnnCompare(a) => run(ExperimentKind::AnnCompare, a),
        Command::AnnScaling(a) => run(ExperimentKind::AnnScaling, a),
        Command::AnnQps(a) => run(ExperimentKind::AnnQps, a),
        Command::KdeSketchSize(a) => run(ExperimentKind::KdeSketchSize, a),
        Command::KdeWindow(a) => run(ExperimentKind::KdeWindow, a),
        Command::KdeVsCounter(a) => run(ExperimentKind::KdeVsCounter, a),
        Command::GenSynthetic(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
