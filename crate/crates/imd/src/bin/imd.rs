//! Command-line front end: `imd mesh|solve|sweep|report --config <path>`.
//!
//! Every subcommand reads one JSON run configuration. `--out` overrides the
//! configured output directory, `--p` the exponent (a comma-separated list
//! for `sweep`/`report`, `inf` allowed), `--method` the cost method of
//! `solve`. The `IMD_THREADS` environment variable caps worker threads.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad configuration or usage,
//! 3 mesh generation failure, 4 inconsistent statics, 5 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use imd::interface::{self, CmdOutput, InterfaceError};

#[derive(Parser)]
#[command(
    name = "imd",
    version,
    about = "Compliance-minimal distribution of isotropic elastic moduli over 2D plates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Parser)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured mesh and write it as a text mesh file.
    Mesh {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve one design problem; export summary, moduli, and stress fields.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Cost exponent (overrides the configuration); `inf` allowed.
        #[arg(long)]
        p: Option<String>,
        /// Cost method, `vp` or `sp` (overrides the configuration).
        #[arg(long)]
        method: Option<String>,
    },
    /// Solve both methods over an exponent list and tabulate compliances.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated exponents (overrides the configuration).
        #[arg(long)]
        p: Option<String>,
        #[arg(long, hide = true)]
        method: Option<String>,
    },
    /// Sweep plus statistics of every recovered design, as a text report.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated exponents (overrides the configuration).
        #[arg(long)]
        p: Option<String>,
        #[arg(long, hide = true)]
        method: Option<String>,
    },
}

fn run() -> Result<CmdOutput, InterfaceError> {
    let cli = Cli::parse();
    interface::configure_threads()?;
    match cli.command {
        Command::Mesh { common } => interface::cmd_mesh(&common.config, common.out.as_deref()),
        Command::Solve { common, p, method } => interface::cmd_solve(
            &common.config,
            common.out.as_deref(),
            p.as_deref(),
            method.as_deref(),
        ),
        Command::Sweep { common, p, method } => interface::cmd_sweep(
            &common.config,
            common.out.as_deref(),
            p.as_deref(),
            method.as_deref(),
        ),
        Command::Report { common, p, method } => interface::cmd_report(
            &common.config,
            common.out.as_deref(),
            p.as_deref(),
            method.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(output) => {
            print!("{}", output.stdout);
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
