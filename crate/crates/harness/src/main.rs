use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use ossheet_harness::config::{ExperimentConfig, Overrides};
use ossheet_harness::experiments::{self, Check, Verdict};
use ossheet_harness::report;

#[derive(Parser)]
#[command(name = "ossheet", version, about = "Simulate operator scaling stable random sheets and measure their fractal dimensions")]
struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Replaces the dimension tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Scaling,
    Tau,
    Sigma,
    Psi,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Write field realizations.
    Simulate(RunArgs),
    /// Numerical checks of the scaling functionals.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "all")]
        which: Which,
    },
    /// Estimate graph dimensions and Holder exponents against theory.
    Dimension(RunArgs),
    /// Summarize the run directories below a directory.
    Report { dir: PathBuf },
}

fn load(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    cfg.apply(Overrides { seed: a.seed, replicates: a.replicates, tolerance: a.tolerance });
    Ok(cfg)
}

fn print(verdicts: &[Verdict]) {
    for v in verdicts {
        println!(
            "{:<24} target {:<12.6} estimate {:<12.6} stderr {:<10.3e} {} {}",
            v.quantity,
            v.target,
            v.estimate,
            v.stderr,
            v.rule,
            if v.passed { "PASS" } else { "FAIL" }
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate(a) => {
            let r = experiments::simulate(&load(&a)?, &a.out)?;
            println!("wrote {} fields to {} in {:.1?}", r.files.len(), r.dir.display(), r.wall_clock);
            Ok(true)
        }
        Command::Verify { run, which } => {
            let checks: Vec<Check> = match which {
                Which::Scaling => vec![Check::Scaling],
                Which::Tau => vec![Check::Tau],
                Which::Sigma => vec![Check::Sigma],
                Which::Psi => vec![Check::Psi],
                Which::All => Check::ALL.to_vec(),
            };
            let r = experiments::verify(&load(&run)?, &run.out, &checks)?;
            print(&r.verdicts);
            println!("results in {} ({:.1?})", r.dir.display(), r.wall_clock);
            Ok(r.passed())
        }
        Command::Dimension(a) => {
            let r = experiments::dimension(&load(&a)?, &a.out)?;
            println!("{}", report::NOTE);
            print(&r.verdicts);
            println!("results in {} ({:.1?})", r.dir.display(), r.wall_clock);
            Ok(r.passed())
        }
        Command::Report { dir } => {
            let s = report::report(&dir)?;
            print!("{}", s.render());
            Ok(s.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
