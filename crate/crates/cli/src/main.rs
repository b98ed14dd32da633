use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polycal_cli::run::{
    resolve_out_dir, run_compare, run_kernel, run_solve, run_verify, RunOptions, OUT_DIR_ENV,
};
use polycal_cli::{CliError, LoadedConfig};

#[derive(Parser)]
#[command(
    name = "polycal",
    version,
    about = "Singular polycaloric solver, property suite and finite-difference comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; defaults to $POLYCAL_OUT_DIR, then the config's output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Glob over property names, e.g. "kernel.*".
    #[arg(long, global = true)]
    filter: Option<String>,

    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for randomized probes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Evaluate u over the probe grid.
    Solve,
    /// Run the property suite; exits 1 when a property fails.
    Verify,
    /// Compare the evaluator with the finite-difference oracle.
    Compare,
    /// Tabulate kernel weights and masses.
    Kernel,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(path) => LoadedConfig::from_path(path)?,
        None => LoadedConfig::from_str("", "<default>")?,
    };
    let filter = cli
        .filter
        .as_deref()
        .map(glob::Pattern::new)
        .transpose()
        .map_err(|e| CliError::Config(format!("--filter: {e}")))?;
    let opts = RunOptions {
        out_dir: resolve_out_dir(cli.out, std::env::var(OUT_DIR_ENV).ok(), &cfg),
        filter,
        seed: cli.seed,
    };
    let outcome = match cli.command {
        Command::Solve => run_solve(&cfg, &opts)?,
        Command::Verify => run_verify(&cfg, &opts)?,
        Command::Compare => run_compare(&cfg, &opts)?,
        Command::Kernel => run_kernel(&cfg, &opts)?,
    };
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    eprintln!("{}", outcome.summary);
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
