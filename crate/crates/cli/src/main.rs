use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaysim::config::parse_config;
use relaysim::engine::run_sweep;
use relaysim::report::emit_results;
use relaysim::selection::Scheme;

#[derive(Parser)]
#[command(name = "relaysim", version, about = "Buffer-aided virtual full-duplex relay simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration or run manifest
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output`, else the
        /// current directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; all cores when omitted
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the base seed of the configuration
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the available schemes
    Schemes,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Schemes => {
            for s in Scheme::ALL {
                println!("{:<14} {}", s.name(), s.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => {
            let mut spec = match parse_config(&config) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if threads == Some(0) {
                eprintln!("error: --threads must be at least 1");
                return ExitCode::from(2);
            }
            let dir = out
                .or_else(|| spec.output.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let result = spec
                .plan()
                .and_then(|plan| run_sweep(&plan, threads))
                .and_then(|records| emit_results(&spec, &records, &dir));
            match result {
                Ok(emitted) => {
                    println!("run {}", emitted.run_id);
                    println!("{}", emitted.results.display());
                    println!("{}", emitted.manifest.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
