use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpinn_cli::{cmd_rar, cmd_report, cmd_run, cmd_sweep, exit_code, Invocation};

/// Train PINNs and gradient-enhanced PINNs from experiment configs.
#[derive(Parser, Debug)]
#[command(name = "gpinn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the configured cell once per seed.
    Run(Common),
    /// Run every cell of the sweep axes across seeds and write sweep.csv.
    Sweep(Common),
    /// Train with residual-based adaptive refinement.
    Rar(Common),
    /// Print a Markdown table from sweep.csv files.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Experiment names under --out (default: all with a sweep.csv).
        experiments: Vec<String>,
        /// Also write the table to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seeds, e.g. 0,1,2.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Reference-solution cache directory (default: <out>/cache).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Parallel runs (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl From<Common> for Invocation {
    fn from(c: Common) -> Self {
        Invocation {
            config: c.config,
            out: c.out,
            seeds: c.seeds,
            cache: c.cache,
            jobs: c.jobs,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => cmd_run(&c.into()).map(|d| println!("{}", d.display())),
        Command::Sweep(c) => cmd_sweep(&c.into()).map(|d| println!("{}", d.display())),
        Command::Rar(c) => cmd_rar(&c.into()).map(|d| println!("{}", d.display())),
        Command::Report { out, experiments, output } => cmd_report(&out, &experiments).and_then(|md| {
            if let Some(path) = output {
                std::fs::write(&path, &md)?;
            }
            print!("{md}");
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
