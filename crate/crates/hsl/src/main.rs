use clap::Parser;
use hsl::experiment::{run_file, Options, Subcommand, BUDGET_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

/// Shifted convolution sums, sieve checks and special-function verifiers.
#[derive(Parser, Debug)]
#[command(name = "hsl", version)]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// Flat TOML configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// JSONL output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run out-of-hypothesis probes; their records never fail the run.
    #[arg(long)]
    probe: bool,
    /// Restrict `special-check` to one lemma.
    #[arg(long)]
    lemma: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let opts = Options {
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out,
        probe: cli.probe,
        lemma: cli.lemma,
        budget_env: std::env::var(BUDGET_ENV).ok(),
    };
    let result = run_file(cli.command, cli.config.as_deref(), &opts).and_then(|out| {
        out.emit()?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            let failed = out.records.iter().filter(|r| !r.pass && !r.probe).count();
            eprintln!("{}: {} records, {} failed", cli.command.name(), out.records.len(), failed);
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
