use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nessfdr_cli::{configure_workers, execute, Command, Failure, Format, Overrides, RunConfig, EXIT_USAGE};

/// Heat transport and fluctuation-dissipation checks for harmonic chains
/// between two thermal baths.
#[derive(Parser)]
#[command(name = "nessfdr", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Per-frequency decomposition of the noise kernel and its residuals.
    FdrCheck(Common),
    /// Steady heat current and the power matrices behind it.
    HeatCurrent(Common),
    /// Heat current and bias peak across one swept parameter.
    Sweep(Common),
    /// Transient powers from an initial state towards the steady state.
    Relax(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config, or a JSON summary whose embedded config is re-run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
}

fn run(cli: Cli) -> Result<i32, Failure> {
    let (cmd, common) = match cli.command {
        Sub::FdrCheck(c) => (Command::FdrCheck, c),
        Sub::HeatCurrent(c) => (Command::HeatCurrent, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::Relax(c) => (Command::Relax, c),
    };
    configure_workers()?;
    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply(&Overrides {
        out: common.out,
        format: common.format,
        tol_abs: common.tol_abs,
        tol_rel: common.tol_rel,
    });
    let out = execute(cmd, &cfg)?;
    println!("{}: {}", cmd.name(), out.headline);
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(out.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
