//! Thin command-line front end over the library; see the README for the
//! config grammar and output formats.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemotaxis::cli::{self, config::load_config, plot, scenario, Mode};

#[derive(Parser)]
#[command(name = "chemotaxis", version, about = "Degenerate chemotaxis simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Scenario-level parallelism (verify-all only).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Treat warnings as failures.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation scenario and audit it.
    Simulate(RunArgs),
    /// Run the fixed-point construction for a scenario (beta > 1).
    Picard(RunArgs),
    /// Run the verification suite (built-in scenarios, or a config listing files).
    VerifyAll {
        /// Optional verify-all config with a `configs = [...]` list.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        strict: bool,
    },
    /// Render decay/balance plots from a diagnostics CSV.
    Plot {
        /// Diagnostics CSV produced by `simulate`.
        #[arg(long)]
        csv: PathBuf,
        /// Run summary JSON; enables the predicted envelope curve.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> chemotaxis::Result<bool> {
    match Cli::parse().command {
        Command::Simulate(args) => {
            let config = load_config(&args.config)?;
            expect_mode(&config, Mode::Simulate)?;
            let summary = cli::run_scenario(&config, &args.out, args.strict)?;
            println!("{}", summary.one_line());
            print_checks(&summary);
            Ok(summary.pass)
        }
        Command::Picard(args) => {
            let config = load_config(&args.config)?;
            expect_mode(&config, Mode::Picard)?;
            let summary = cli::run_scenario(&config, &args.out, args.strict)?;
            println!("{}", summary.one_line());
            print_checks(&summary);
            Ok(summary.pass)
        }
        Command::VerifyAll { config, out, threads, strict } => {
            let loaded = config.as_deref().map(load_config).transpose()?;
            if let Some(c) = &loaded {
                expect_mode(c, Mode::VerifyAll)?;
            }
            let base = config.as_deref().and_then(|p| p.parent()).unwrap_or(std::path::Path::new(".")).to_path_buf();
            let configs = scenario::resolve_verify_configs(loaded.as_ref(), &base)?;
            let summaries = cli::verify_all(&configs, &out, threads, strict)?;
            let mut all_pass = true;
            for s in &summaries {
                println!("{}", s.one_line());
                all_pass &= s.pass;
            }
            println!(
                "{}: {} of {} scenarios passed",
                if all_pass { "PASS" } else { "FAIL" },
                summaries.iter().filter(|s| s.pass).count(),
                summaries.len()
            );
            Ok(all_pass)
        }
        Command::Plot { csv, summary, out } => {
            let series = plot::read_csv(&csv)?;
            let envelope = summary.as_deref().map(plot::envelope_from_summary).transpose()?.flatten();
            let written = plot::render_plots(&series, envelope.as_ref(), &out)?;
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
    }
}

fn expect_mode(config: &cli::ScenarioConfig, expected: Mode) -> chemotaxis::Result<()> {
    if config.mode != expected {
        return Err(chemotaxis::Error::Config(format!(
            "config mode {:?} does not match the subcommand",
            config.mode
        )));
    }
    Ok(())
}

fn print_checks(summary: &scenario::RunSummary) {
    for c in &summary.checks {
        println!(
            "  [{}] {}: measured {:.6e} vs threshold {:.6e} — {}",
            if c.pass { "ok" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.detail
        );
    }
    for w in &summary.warnings {
        println!("  [warn] {w}");
    }
}
