use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sumlogcone_cli::config::parse_seeds;
use sumlogcone_cli::{run, CliResult, Experiment, ExperimentConfig};

/// Sum-log-concave experiments: rock-paper-scissors, XOR mixtures,
/// convergence bounds, gradient checks and saddle escape.
#[derive(Parser)]
#[command(name = "sumlogcone", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smooth XOR and Bradley-Terry on rock-paper-scissors duels.
    Rps(Overrides),
    /// Checkered regression on a sampled XOR Gaussian mixture.
    XorGmm(Overrides),
    /// XGD averaged excess against its bound on the planar smooth-XOR family.
    Converge(Overrides),
    /// Analytic checkered gradients against finite differences.
    Gradcheck(Overrides),
    /// GD and XGD started at the smooth-XOR saddle.
    Saddle(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML config; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds, e.g. 0,1,2.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate (the base rate for inverse-sqrt schedules).
    #[arg(long)]
    lr: Option<f64>,
}

fn configure(experiment: Experiment, o: Overrides) -> CliResult<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::load(experiment, path)?,
        None => ExperimentConfig::defaults(experiment),
    };
    let seeds = o.seeds.as_deref().map(parse_seeds).transpose()?;
    cfg.override_with(o.out, seeds, o.epochs, o.lr)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, overrides) = match cli.command {
        Command::Rps(o) => (Experiment::Rps, o),
        Command::XorGmm(o) => (Experiment::XorGmm, o),
        Command::Converge(o) => (Experiment::Converge, o),
        Command::Gradcheck(o) => (Experiment::Gradcheck, o),
        Command::Saddle(o) => (Experiment::Saddle, o),
    };
    let outcome = configure(experiment, overrides).and_then(|cfg| {
        let report = run(&cfg)?;
        for check in &report.checks {
            println!("{check}");
        }
        println!("wrote {}", cfg.out.join("summary.jsonl").display());
        report.into_result()
    });
    match outcome {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
