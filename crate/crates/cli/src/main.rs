use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spectra_inv::{parse_config, run, Command};

/// Forward and inverse Sturm–Liouville spectral experiments.
///
/// Exit status: 0 when every assertion of the command holds, 1 when one
/// fails (or a solver gives up), 2 for configuration errors.
#[derive(Parser, Debug)]
#[command(name = "spectra-inv", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's "out_dir", else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match parse_config(&cli.config, cli.command, cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = cli.out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match run(&cfg, &out) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in &failures {
                eprintln!("assertion failed: {f}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
