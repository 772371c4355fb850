use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quadfluid_cli::config::{parse_config, Scenario, ScenarioConfig};
use quadfluid_cli::scenario::{run_scenario, Bound};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// Envelope, fluid and wave solvers for a beam in a quadrupole-like well.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Only report errors
        #[arg(long)]
        quiet: bool,
    },
    /// Check a config file and report every problem found
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        quiet: bool,
    },
    /// List the available scenarios
    ListScenarios,
}

#[derive(Args)]
struct Overrides {
    /// Directory for CSV and JSON output (overrides `output_dir`)
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Spacing of diagnostic samples in s (overrides `output_cadence`)
    #[arg(long)]
    cadence: Option<f64>,
}

fn load(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    let mut cfg = parse_config(&text).map_err(|errors| {
        for e in &errors.0 {
            eprintln!("{}:{e}", path.display());
        }
        ExitCode::from(EXIT_CONFIG)
    })?;
    if let Some(dir) = &overrides.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(c) = overrides.cadence {
        if !(c > 0.0 && c.is_finite()) {
            eprintln!("error: --cadence must be positive, got {c}");
            return Err(ExitCode::from(EXIT_CONFIG));
        }
        cfg.output_cadence = c;
    }
    Ok(cfg)
}

fn run(path: &Path, overrides: &Overrides, quiet: bool) -> ExitCode {
    let cfg = match load(path, overrides) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let report = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SOLVER);
        }
    };
    if !quiet {
        println!("{} (s_end = {})", cfg.scenario.name(), cfg.s_end);
        for m in &report.metrics {
            let cmp = match m.bound {
                Bound::Below => "<",
                Bound::Above => ">",
            };
            let mark = if m.pass { "pass" } else { "FAIL" };
            println!(
                "  [{mark}] criterion {}: {} = {:.3e} ({cmp} {:e})",
                m.criterion, m.name, m.value, m.threshold
            );
        }
        println!("output written to {}", cfg.output_dir.display());
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        if quiet {
            eprintln!("{}: one or more metrics failed", cfg.scenario.name());
        }
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = matches!(cli.command, Command::Run { quiet: true, .. } | Command::Validate { quiet: true, .. });
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }))
        .init();
    match cli.command {
        Command::Run {
            config,
            overrides,
            quiet,
        } => run(&config, &overrides, quiet),
        Command::Validate {
            config,
            overrides,
            quiet,
        } => match load(&config, &overrides) {
            Ok(cfg) => {
                if !quiet {
                    println!("{}: ok ({})", config.display(), cfg.scenario.name());
                }
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<22}{}", s.name(), s.description());
            }
            ExitCode::SUCCESS
        }
    }
}
