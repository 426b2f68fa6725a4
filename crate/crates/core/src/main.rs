//! Command-line harness. Exit codes: 0 success, 1 configuration or solver
//! error, 2 control-functional hitting time, 3 blow-up suspicion, 4
//! positivity loss. `NSF_LAB_OUT_DIR` overrides the configured output
//! directory.

use clap::{Parser, Subcommand};
use nsf_lab::config::{Mode, RunConfig};
use nsf_lab::runner;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nsf-lab",
    about = "Finite-difference laboratory for compressible heat-conducting flow \
             with runtime regularity diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured initial-boundary value problem and emit
    /// per-step diagnostics.
    Simulate {
        /// Path to a TOML run configuration.
        config: PathBuf,
    },
    /// Manufactured-solution convergence study; fails if the declared
    /// orders are not attained.
    MmsVerify {
        config: PathBuf,
        /// Override the refinement levels from the [mms] block.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Solve the boundary-extension problems only and report trace
    /// fidelity.
    ExtensionTest {
        config: PathBuf,
    },
}

fn run() -> Result<i32, nsf_lab::NsfError> {
    let cli = Cli::parse();
    let (path, mode, levels) = match &cli.command {
        Command::Simulate { config } => (config, Mode::Simulate, None),
        Command::MmsVerify { config, levels } => (config, Mode::MmsVerify, levels.clone()),
        Command::ExtensionTest { config } => (config, Mode::ExtensionTest, None),
    };
    let mut cfg = RunConfig::load(path)?;
    // The subcommand is authoritative; a config written for one mode can be
    // replayed under another (e.g. the solver leg of a verification run).
    cfg.mode = mode;
    if mode == Mode::MmsVerify && cfg.mms.is_none() {
        cfg.mms = Some(Default::default());
    }
    if let (Some(levels), Some(block)) = (levels, cfg.mms.as_mut()) {
        block.levels = levels;
    }
    let setup = cfg.build()?;
    let out_dir = std::env::var_os("NSF_LAB_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| setup.output.dir.clone());
    runner::execute(&setup, &out_dir)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
