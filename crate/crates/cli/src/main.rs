use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use idnc_cli::commands;
use idnc_cli::config::Overrides;
use idnc_cli::verify::{Mutation, Suite, VerifyOptions, DEFAULT_MAX_BITS, DEFAULT_SEED};
use idnc_cli::{parse_count, CliError};
use idnc_core::policies::SecondaryWeight;

/// Completion-delay experiments for instantly decodable network coding.
///
/// Exit status: 0 success, 1 verification failure, 2 configuration error,
/// 3 runtime error.
#[derive(Parser)]
#[command(name = "idnc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a spec file and emit CSV.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_count)]
        trials: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// CSV destination; stdout when neither this nor the spec sets one.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Count the N initial uncoded slots in every delay.
        #[arg(long)]
        include_initial: bool,
        #[arg(long, value_parser = parse_weight)]
        secondary_weight: Option<SecondaryWeight>,
    },
    /// Run a verification suite: formulas, ssp or policies.
    Verify {
        suite: Suite,
        #[arg(long, value_parser = parse_count, default_value = "100000")]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_BITS)]
        max_bits: usize,
        #[arg(long, hide = true)]
        mutate: Option<Mutation>,
    },
    /// Solve a small fixture exactly and print its optimal first transmission.
    Oracle {
        fixture: PathBuf,
        #[arg(long)]
        max_bits: Option<usize>,
    },
    /// Print the graph of a fixture as an adjacency list.
    DumpGraph { fixture: PathBuf },
}

fn parse_weight(s: &str) -> Result<SecondaryWeight, String> {
    s.parse().map_err(|e: idnc_core::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep { spec, seed, trials, threads, out, include_initial, secondary_weight } => {
            let overrides = Overrides { seed, trials, out, include_initial, secondary_weight };
            let result = commands::sweep(&spec, &overrides, threads)?;
            match result.written_to {
                Some(path) => {
                    print!("{}", result.table);
                    println!("wrote {}", path.display());
                }
                None => {
                    eprint!("{}", result.table);
                    print!("{}", result.csv);
                }
            }
        }
        Command::Verify { suite, trials, seed, threads, max_bits, mutate } => {
            let opts = VerifyOptions { trials, seed, max_bits, mutation: mutate };
            print!("{}", commands::verify(suite, &opts, threads)?);
        }
        Command::Oracle { fixture, max_bits } => print!("{}", commands::oracle(&fixture, max_bits)?),
        Command::DumpGraph { fixture } => print!("{}", commands::dump_graph(&fixture)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Verification(report)) => {
            println!("{report}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("idnc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
