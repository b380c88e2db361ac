use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radmm_cli::{commands, CliError, CliResult, Overrides, ReconMethod};

/// Distributed radar imaging with consensus and sharing ADMM.
#[derive(Debug, Parser)]
#[command(name = "radmm", version)]
struct Cli {
    /// Worker threads for cluster-parallel work (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write its bundle.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the scene seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct an image from a scenario bundle.
    Reconstruct {
        bundle: PathBuf,
        #[arg(long, value_enum)]
        method: ReconMethod,
        #[arg(long)]
        out: PathBuf,
        /// Config whose solver, metrics and output sections replace the bundle's.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        /// lambda / mu
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Sweep beta and lambda/mu and pick the lowest-entropy image.
    Sweep {
        bundle: PathBuf,
        #[arg(long, value_enum)]
        method: ReconMethod,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated beta values.
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        /// Comma-separated lambda/mu values.
        #[arg(long, value_delimiter = ',', required = true)]
        ratio: Vec<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Report sparsity, entropy and optionally support F1 of an image CSV.
    Metrics {
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Truth support CSV (as written by `simulate`).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn execute(command: Command) -> CliResult<String> {
    match command {
        Command::Simulate { config, out, seed } => commands::simulate(&config, &out, seed),
        Command::Reconstruct {
            bundle,
            method,
            out,
            config,
            beta,
            ratio,
            max_iters,
        } => {
            let overrides = Overrides {
                beta,
                ratio,
                max_iters,
            };
            commands::reconstruct(&bundle, method, config.as_deref(), &overrides, &out)
        }
        Command::Sweep {
            bundle,
            method,
            out,
            config,
            beta,
            ratio,
            max_iters,
        } => commands::sweep(&bundle, method, config.as_deref(), &beta, &ratio, max_iters, &out),
        Command::Metrics {
            image,
            config,
            truth,
        } => commands::metrics(&image, config.as_deref(), truth.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))
            .and_then(|pool| pool.install(|| execute(cli.command))),
        None => execute(cli.command),
    };
    match outcome {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("radmm: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
