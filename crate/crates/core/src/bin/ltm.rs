use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ltm_core::dynamics::Mode;
use ltm_core::harness::{error_record, execute, Experiment, ExperimentConfig};
use ltm_core::ingest::Format;

#[derive(Parser)]
#[command(name = "ltm", version, about = "Linear threshold cascades: dynamics, ensembles, mean-field recursion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Network statistics and degree marginals
    Stats(Flags),
    /// Mean-field trajectory, fixed points and limit profile
    Recursion(Flags),
    /// Exact dynamics on one network
    Simulate(Flags),
    /// Final activation over a seed grid, with the recursion staircase
    Sweep(Flags),
    /// Simulation/recursion deviation over a size grid
    Concentration(Flags),
    /// Branching-process root means against the recursion
    Branching(Flags),
    /// Export one configuration-model draw
    Sample(Flags),
    /// Run an experiment described by a JSON config
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Flags {
    /// Edge list (`tail head` per line, `#` comments)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Statistics JSON
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Population `w:k:r,...`
    #[arg(long)]
    mixture: Option<String>,
    /// Threshold CDF for --input, e.g. `0.3@1/5,0.7@1/2`
    #[arg(long)]
    threshold_cdf: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    /// Comma-separated sizes
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long, default_value = "ltm")]
    mode: Mode,
    #[arg(long)]
    upsilon: Option<f64>,
    /// `a:b:count` or a comma list
    #[arg(long)]
    upsilon_grid: Option<String>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value_t = 10)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Depth for branching / concentration
    #[arg(long, default_value_t = 3)]
    t: u32,
    #[arg(long, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    freeze_zero_outdegree: bool,
}

impl Flags {
    fn into_config(self, experiment: Experiment) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            input: self.input,
            stats: self.stats,
            mixture: self.mixture,
            threshold_cdf: self.threshold_cdf,
            n: self.n,
            n_grid: self.n_grid,
            mode: self.mode,
            upsilon: self.upsilon,
            upsilon_grid: self.upsilon_grid,
            xi: self.xi,
            horizon: self.horizon,
            replicas: self.replicas,
            seed: self.seed,
            t: self.t,
            format: self.format,
            out: self.out,
            freeze_zero_outdegree: self.freeze_zero_outdegree,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command {
        Command::Stats(f) => Ok(f.into_config(Experiment::Stats)),
        Command::Recursion(f) => Ok(f.into_config(Experiment::Recursion)),
        Command::Simulate(f) => Ok(f.into_config(Experiment::Simulate)),
        Command::Sweep(f) => Ok(f.into_config(Experiment::Sweep)),
        Command::Concentration(f) => Ok(f.into_config(Experiment::Concentration)),
        Command::Branching(f) => Ok(f.into_config(Experiment::Branching)),
        Command::Sample(f) => Ok(f.into_config(Experiment::Sample)),
        Command::Run { config } => ExperimentConfig::load(&config),
    };
    match cfg.and_then(|cfg| execute(&cfg).map(|text| (cfg, text))) {
        Ok((cfg, text)) => {
            if cfg.out.is_none() {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::FAILURE
        }
    }
}
