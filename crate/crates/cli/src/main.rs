use clap::Parser;
use rvmlab_cli::{run, Command, RunConfig};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Stationary axisymmetric Vlasov–Maxwell equilibria: solves, continuation,
/// stability brackets, particle checks.
#[derive(Debug, Parser)]
#[command(name = "rvmlab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for sampled particles and random checks.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let out = cfg.out_dir(args.out.as_deref());
    match run(args.command, &cfg, &out, args.seed) {
        Ok(outcome) => {
            // A closed pipe (e.g. `| head`) is not an error.
            let mut stdout = std::io::stdout().lock();
            for line in &outcome.report {
                let _ = writeln!(stdout, "{line}");
            }
            for f in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
