use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nctorus_cli::{run_file, verify, verify_to, CliError};

#[derive(Parser)]
#[command(name = "nctorus", version, about = "Experiments on noncommutative tori, their coverings and the Moyal plane")]
struct Cli {
    /// Directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to NCTORUS_THREADS, then to the number of cores.
    #[arg(long, global = true, env = "NCTORUS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Run the acceptance suite.
    VerifyAll {
        /// Restrict to one module: nctorus, covering, moyal, periodize or cli.
        #[arg(long)]
        filter: Option<String>,
    },
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    eprintln!("{}", e.trailer());
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(&CliError::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::Config(e.to_string()));
        }
    }
    match cli.command {
        Command::Run { config } => match run_file(&config, cli.out.as_deref()) {
            Ok((report, written)) => {
                for c in &report.checks {
                    println!(
                        "{:<24} {:>24} {} {:<12} {}",
                        c.name,
                        format!("{:.6e}", c.value + 0.0),
                        c.relation.symbol(),
                        format!("{:.1e}", c.threshold),
                        if c.pass { "PASS" } else { "FAIL" }
                    );
                }
                for n in &report.notes {
                    println!("{n}");
                }
                for p in written {
                    println!("wrote {}", p.display());
                }
                if report.pass() { ExitCode::SUCCESS } else { ExitCode::from(2) }
            }
            Err(e) => fail(&e),
        },
        Command::VerifyAll { filter } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("nctorus-out"));
            match verify_to(filter.as_deref(), &out) {
                Ok(results) => {
                    print!("{}", verify::render(&results));
                    println!("artifacts in {}", out.display());
                    if results.iter().all(|r| r.pass) { ExitCode::SUCCESS } else { ExitCode::from(2) }
                }
                Err(e) => fail(&e),
            }
        }
    }
}
