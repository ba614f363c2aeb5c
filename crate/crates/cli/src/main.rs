mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Flags;

/// Overlapped RBF-FD operators and heat-equation experiments.
#[derive(Parser, Debug)]
#[command(name = "orbffd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate node sets and write them as node files.
    Nodes,
    /// Assemble the differentiation matrices and write them in Matrix Market form.
    Assemble {
        /// Use the one-stencil-per-node routine instead of the overlapped one.
        #[arg(long)]
        reference: bool,
    },
    /// Solve the manufactured heat problem and report errors.
    Heat,
    /// Heat errors over a node-count sweep, with fitted orders.
    Convergence,
    /// Measured and modelled assembly speedup against delta = 1.
    Speedup {
        /// Cost constant of the speedup model.
        #[arg(long, default_value_t = 0.4)]
        model_c: f64,
    },
    /// Eigenvalues and Gershgorin disks of the interior block.
    Eigs,
    /// Local Lebesgue values of each stencil.
    Lebesgue {
        /// laplacian, normal or identity.
        #[arg(long, default_value = "laplacian")]
        op: String,
    },
    /// Split the error between two fields into dissipation and dispersion.
    Decompose {
        /// Reference field; the last column of each row is used.
        exact: PathBuf,
        /// Approximate field, same layout.
        approx: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = cli.flags.resolve().and_then(|s| commands::run(&cli.command, &s));
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
