use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ppsr::bench::{run_experiment, summarize, write_results, Benchmark, ExperimentConfig, Mode};
use ppsr::protocol::TransportKind;
use ppsr::ring::FixedCodec;

mod verify;

/// Privacy-preserving symbolic regression benchmark harness.
#[derive(Parser)]
#[command(name = "ppsr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated GP experiments on one benchmark and write CSV + JSON results.
    Run(RunArgs),
    /// Run the oracle suites and report one line per check.
    Verify {
        /// Also run the recovery and secure end-to-end experiments (slow).
        #[arg(long)]
        full: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// nguyen9, nguyen10, nguyen12 or friedman2.
    #[arg(long)]
    benchmark: Benchmark,
    /// plaintext or secure.
    #[arg(long, default_value = "plaintext")]
    mode: Mode,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Base seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Population size.
    #[arg(long, default_value_t = 1000)]
    pop: usize,
    /// Maximum number of generations.
    #[arg(long, default_value_t = 50)]
    gens: usize,
    #[arg(long, default_value_t = 64)]
    ring_bits: u32,
    #[arg(long, default_value_t = 16)]
    frac_bits: u32,
    /// inproc or tcp (secure mode only).
    #[arg(long, default_value = "inproc")]
    transport: TransportKind,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Run seeds one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

fn run(args: RunArgs) -> Result<()> {
    FixedCodec::with_bits(args.ring_bits, args.frac_bits).context("invalid ring parameters")?;
    let mut config = ExperimentConfig::new(args.benchmark, args.mode, args.runs, args.seed);
    config.gp.population_size = args.pop;
    config.gp.max_generations = args.gens;
    config.session.ring_bits = args.ring_bits;
    config.session.frac_bits = args.frac_bits;
    config.session.transport = args.transport;
    config.parallel = !args.sequential;

    let result = run_experiment(&config)?;
    for r in &result.records {
        println!(
            "seed {:>4}  gens {:>2}  train_mse {:<11.4e} test_r2 {:<8.4} {:>3}  {}",
            r.seed,
            r.generations,
            r.train_mse,
            r.test_r2,
            if r.recovered { "yes" } else { "no" },
            r.best_expr
        );
    }
    let s = summarize(&result);
    println!(
        "{} {}: recovered {}/{} ({:.1}%)",
        s.benchmark,
        s.mode,
        s.recovered,
        s.runs,
        100.0 * s.recovery_rate
    );
    let (csv, json) = write_results(&args.out, &result).context("writing results")?;
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::Verify { full } => verify::run(full),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
