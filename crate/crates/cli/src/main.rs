use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use outcr_cli::{run_config_file, Overrides};

/// Run one outcr job described by a JSON config file.
#[derive(Parser, Debug)]
#[command(name = "outcr", version)]
struct Args {
    /// Path to the run config.
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the results path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the Monte-Carlo sample count (outage and simo).
    #[arg(long = "mc-samples")]
    mc_samples: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let ov = Overrides { seed: args.seed, out: args.out, mc_samples: args.mc_samples };
    ExitCode::from(run_config_file(&args.config, &ov) as u8)
}
