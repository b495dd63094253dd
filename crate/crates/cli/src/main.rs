//! `sticky`: run configured ensembles, run the acceptance checks, or print
//! the default configuration.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sticky_core::io::{defaults_text, parse_config, resolve_output_dir, run, RunSummary};
use sticky_core::verify::{run_suite, VerifyOptions};
use sticky_core::Error;

const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "sticky", version, about = "Sticky-reflected interacting particle simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the ensemble described by a config file.
    Run {
        config: PathBuf,
    },
    /// Run the acceptance checks and print one line per criterion.
    Verify {
        /// Smaller ensembles; tolerances are unchanged.
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        /// Also write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run only these criteria (repeatable).
        #[arg(long = "criterion", value_parser = clap::value_parser!(u8).range(1..=9))]
        criteria: Vec<u8>,
    },
    /// Print a complete config with every key at its default.
    PrintDefaults,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Verify {
            fast,
            seed,
            report,
            criteria,
        } => cmd_verify(VerifyOptions { fast, seed }, report, &criteria),
        Command::PrintDefaults => {
            print!("{}", defaults_text());
            Ok(ExitCode::SUCCESS)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_run(path: &PathBuf) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(path)?;
    let cfg = parse_config(&text).map_err(Error::Config)?;
    let out = resolve_output_dir(&cfg);
    let summary = run(&cfg, &out)?;
    print_summary(&summary, &out);
    Ok(ExitCode::SUCCESS)
}

fn print_summary(s: &RunSummary, out: &std::path::Path) {
    println!(
        "{} paths to t = {} (seed {}) in {:.2} s; output in {}",
        s.paths,
        s.horizon,
        s.seed,
        s.wall_time_seconds,
        out.display()
    );
    for (i, e) in s.occupation.iter().enumerate() {
        println!("  particle {}: boundary fraction {:.4} ± {:.4}", i + 1, e.mean, e.stderr);
    }
    if let Some(l) = &s.local_time {
        println!("  local time {:.4} ± {:.4}", l.mean, l.stderr);
    }
    if let Some(d) = s.min_pair_distance {
        println!("  min pair distance {d:.4}");
    }
    for o in &s.observables {
        println!(
            "  {}: E f(X_T) = {:.4} ± {:.4}, martingale residual {:.2e} ± {:.2e}",
            o.name,
            o.final_value.mean,
            o.final_value.stderr,
            o.martingale_residual.mean,
            o.martingale_residual.stderr
        );
    }
    if let Some(g) = &s.girsanov {
        println!(
            "  weight mean {:.4} ± {:.4}, effective sample size {:.1}",
            g.mean_weight.mean, g.mean_weight.stderr, g.effective_sample_size
        );
    }
}

fn cmd_verify(opts: VerifyOptions, report: Option<PathBuf>, only: &[u8]) -> Result<ExitCode, Error> {
    let suite = run_suite(&opts, only, |r| println!("{}", r.line()));
    let passed = suite.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed", suite.criteria.len());
    if let Some(path) = report {
        fs::write(path, suite.to_json()?)?;
    }
    Ok(if suite.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ACCEPTANCE)
    })
}
