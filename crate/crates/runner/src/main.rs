use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lvwf_runner::experiment::{self, default_root, exit_code, ExperimentSpec, OUTPUT_ROOT_ENV};
use lvwf_runner::{run_suite, Mode, Suite};

#[derive(Parser)]
#[command(name = "lvwf", version, about = "Host-parasite Lotka-Volterra / Wright-Fisher experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON experiment specification.
    Run {
        spec: PathBuf,
        /// Output directory; defaults to `$LVWF_OUTPUT_ROOT/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for replica parallelism.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a group of acceptance criteria.
    Suite {
        #[arg(value_enum)]
        name: Suite,
        /// Ten times fewer replicas and doubled statistical tolerances.
        #[arg(long)]
        fast: bool,
        /// Output root; defaults to `$LVWF_OUTPUT_ROOT`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn init_threads(threads: Option<usize>) -> Result<(), ExitCode> {
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return Err(ExitCode::from(2));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return Err(ExitCode::from(2));
        }
    }
    Ok(())
}

fn fail(err: lvwf_core::Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(&err) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { spec, out, threads } => {
            if let Err(code) = init_threads(threads) {
                return code;
            }
            let spec = match ExperimentSpec::load(&spec) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            match experiment::run(&spec, out.as_deref()) {
                Ok(report) => {
                    for v in &report.artifacts.verdicts {
                        println!("[{}] {}", if v.passed { "PASS" } else { "FAIL" }, v.name);
                    }
                    println!("outputs written to {}", report.dir.display());
                    ExitCode::from(if report.passed() { 0 } else { 1 })
                }
                Err(e) => fail(e),
            }
        }
        Command::Suite { name, fast, out, threads } => {
            if let Err(code) = init_threads(threads) {
                return code;
            }
            let root = out.unwrap_or_else(default_root);
            let mode = if fast { Mode::FAST } else { Mode::FULL };
            match run_suite(name, mode, &root, |t| println!("{}", t.line())) {
                Ok(report) => {
                    let passed = report.results.iter().filter(|t| t.outcome.passed && t.within_budget()).count();
                    println!(
                        "suite {}: {passed}/{} passed, results in {} (root from --out or {OUTPUT_ROOT_ENV})",
                        name.name(),
                        report.results.len(),
                        report.dir.display()
                    );
                    ExitCode::from(if report.passed { 0 } else { 1 })
                }
                Err(e) => fail(e),
            }
        }
    }
}
