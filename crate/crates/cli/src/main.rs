use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Prescribed scalar curvature and Lichnerowicz solvers on radial
/// asymptotically hyperbolic manifolds.
#[derive(Parser)]
#[command(name = "cclab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the configured problem and write a report.
    Run { config: PathBuf },
    /// Re-run a scenario over a list of values for one scalar config field.
    Sweep {
        config: PathBuf,
        /// Dotted path of a numeric field, e.g. `params.width`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Compare the first conformal eigenvalue with the Yamabe quotient.
    Yamabe { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { cclab::EXIT_CONFIG } else { cclab::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match cli.cmd {
        Cmd::Run { config } => cclab::run(&config),
        Cmd::Sweep { config, param, values } => cclab::sweep(&config, &param, &values),
        Cmd::Yamabe { config } => cclab::yamabe(&config),
    };
    ExitCode::from(code as u8)
}
