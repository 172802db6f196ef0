use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use bch_cli::{parse_config, run, CliError, Mode};

/// Optimal velocity control for a Brinkman flow coupled to a sixth-order
/// phase-field model: forward runs, adjoint-based optimization, and the
/// verification suite.
#[derive(Parser)]
#[command(name = "bch", version)]
struct Cli {
    /// forward | optimize | grad-check | taylor-test | sparsity-sweep | verify-all
    mode: String,
    /// Configuration file (INI-like; see README for the grammar)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [run] out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides [run] seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweep entries (overrides [run] threads)
    #[arg(long)]
    threads: Option<usize>,
}

fn real_main(cli: Cli) -> Result<(), CliError> {
    let mode = Mode::parse(&cli.mode).map_err(|message| {
        CliError::Config(vec![bch_cli::error::Violation {
            section: "cli".into(),
            key: "mode".into(),
            line: None,
            message,
        }])
    })?;
    let mut config = parse_config(&cli.config)?;
    config.run.mode = mode;
    if let Some(out) = cli.out {
        config.run.out = out;
    }
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.run.threads = threads.max(1);
    }
    let base = cli.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    run(&config, &base)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter("BCH_LOG").default_filter_or("warn"),
    )
    .init();
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
