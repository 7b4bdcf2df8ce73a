use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use elastic_wire::config::{parse_config, Mode, RunConfig};
use elastic_wire::run::{execute, RunStatus};

const EXIT_VALIDATION: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "elastic-wire", version, about = "Elastic wire with thickness in a Riemannian manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured mode and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Validate a configuration without running it.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Convergence study at N, 2N, 4N, … regardless of the configured mode.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_VALIDATION)
    })?;
    parse_config(&text).map_err(|errors| {
        eprintln!("invalid configuration {}:", path.display());
        for e in &errors.0 {
            eprintln!("  {e}");
        }
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn launch(config: &RunConfig, out: &Path, quiet: bool) -> ExitCode {
    match execute(config, out, quiet) {
        Ok(RunStatus::Completed) => {
            if !quiet {
                eprintln!("outputs written to {}", out.display());
            }
            ExitCode::SUCCESS
        }
        Ok(RunStatus::Aborted(f)) => {
            eprintln!("run aborted ({}): {}", f.kind, f.message);
            ExitCode::from(EXIT_ABORT)
        }
        Err(e) => {
            eprintln!("cannot write outputs to {}: {e}", out.display());
            ExitCode::from(EXIT_ABORT)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check { config } => load(config).map(|c| {
            if !cli.quiet {
                println!("{}: ok ({} on {}, N = {})", config.display(), mode_name(c.mode), c.manifold.name(), c.grid.n);
            }
            ExitCode::SUCCESS
        }),
        Command::Run { config, out } => load(config).map(|c| launch(&c, out, cli.quiet)),
        Command::Study { config, out } => load(config).map(|mut c| {
            c.mode = Mode::ConvergenceStudy;
            launch(&c, out, cli.quiet)
        }),
    };
    outcome.unwrap_or_else(|code| code)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::March => "march",
        Mode::Picard => "picard",
        Mode::ConvergenceStudy => "convergence-study",
    }
}
