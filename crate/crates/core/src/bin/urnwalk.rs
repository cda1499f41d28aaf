use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use urnwalk::experiment::{read_report, run_experiment, summary_text, write_outputs};
use urnwalk::config::ExperimentConfig;
use urnwalk::{Error, ReinforcementSpec, SampleSizeLaw};

/// Memory-reinforced random walks driven by a four-colour urn.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the ensemble (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the summary of a finished run and exit with its status.
    Report { dir: PathBuf },
    /// List the built-in reinforcement functions and sample-size laws.
    Catalog,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Hypothesis(_) => 3,
        _ => 2,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("urnwalk: {e}");
    ExitCode::from(exit_code_for(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, threads } => {
            if let Some(t) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
                    eprintln!("urnwalk: {e}");
                    return ExitCode::from(2);
                }
            }
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(o) = out {
                cfg.output = o;
            }
            let report = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            if let Err(e) = write_outputs(&report, &cfg.output) {
                return fail(e);
            }
            print!("{}", summary_text(&report));
            ExitCode::from(report.exit_status() as u8)
        }
        Command::Report { dir } => match read_report(&dir) {
            Ok(r) => {
                print!("{}", summary_text(&r));
                ExitCode::from(r.exit_status() as u8)
            }
            Err(e) => fail(e),
        },
        Command::Catalog => {
            println!("reinforcement functions:");
            for (name, args, note) in ReinforcementSpec::catalog() {
                println!("  {name:<12} {args:<32} {note}");
            }
            println!("sample-size laws:");
            for (name, args, note) in SampleSizeLaw::catalog() {
                println!("  {name:<12} {args:<32} {note}");
            }
            ExitCode::SUCCESS
        }
    }
}
