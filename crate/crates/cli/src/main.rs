//! `termhedge`: batch front end of the term-structure hedging lab.

mod commands;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::Outcome;
use scenario::Scenario;

#[derive(Parser, Debug)]
#[command(name = "termhedge", version, about = "Term-structure hedging lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; replaces the scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Parent directory of the run directories.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Scenario override `dotted.key=value`; the value is read as JSON when possible.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Simulate the discounted curve and check the martingale and freeze properties.
    Simulate {
        /// Also write every path to paths.csv.
        #[arg(long)]
        paths: bool,
    },
    /// Monte Carlo price of the payout.
    Price,
    /// Time-zero hedge portfolio.
    Hedge,
    /// Hedging backtest along simulated paths.
    Replicate,
    /// Sobolev constants, hedge support and the fast property checks.
    Verify {
        /// Criteria to run, e.g. `1,4-5`.
        #[arg(long)]
        criteria: Option<String>,
    },
    /// Consolidated acceptance-criteria table.
    Table {
        /// Criteria to run, e.g. `1,4-5`; all by default.
        #[arg(long)]
        criteria: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Price => "price",
            Command::Hedge => "hedge",
            Command::Replicate => "replicate",
            Command::Verify { .. } => "verify",
            Command::Table { .. } => "table",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Precondition(String),
    Budget(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Precondition(_) | CliError::Io(_) => 3,
            CliError::Budget(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "configuration error: {m}"),
            CliError::Precondition(m) => write!(f, "precondition violated: {m}"),
            CliError::Budget(m) => write!(f, "budget exceeded: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<termhedge::Error> for CliError {
    fn from(e: termhedge::Error) -> Self {
        match e {
            termhedge::Error::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            termhedge::Error::Io(m) => CliError::Io(m),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn write_run(dir: &Path, report: &serde_json::Value, outcome: &Outcome) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(dir.join("report.json"), text)?;
    for (name, bytes) in &outcome.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Precondition(format!("thread pool: {e}")))?;
    }
    let criteria = |spec: &Option<String>, default: &[usize]| match spec {
        Some(s) => commands::parse_criteria(s),
        None => Ok(default.to_vec()),
    };
    let scenario = match &cli.config {
        Some(path) => {
            let mut s = Scenario::load(path, &cli.overrides)?;
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            Some(s)
        }
        None if matches!(cli.command, Command::Table { .. }) => None,
        None => return Err(CliError::Parse(format!("`{}` needs --config", cli.command.name()))),
    };
    let seed = scenario.as_ref().map_or(cli.seed.unwrap_or(0), |s| s.seed);
    let outcome = match (&cli.command, &scenario) {
        (Command::Table { criteria: c }, _) => {
            let all: Vec<usize> = termhedge::experiments::CRITERIA.iter().map(|c| c.0).collect();
            commands::table_cmd(seed, &criteria(c, &all)?)?
        }
        (cmd, Some(s)) => {
            let r = s.resolve()?;
            match cmd {
                Command::Simulate { paths } => commands::simulate_cmd(s, &r, seed, *paths)?,
                Command::Price => commands::price_cmd(s, &r, seed)?,
                Command::Hedge => commands::hedge_cmd(s, &r, seed)?,
                Command::Replicate => commands::replicate_cmd(s, &r, seed)?,
                Command::Verify { criteria: c } => {
                    commands::verify_cmd(s, &r, seed, &criteria(c, &commands::VERIFY_CRITERIA)?)?
                }
                Command::Table { .. } => unreachable!("handled above"),
            }
        }
        (_, None) => unreachable!("config checked above"),
    };
    let hash = scenario.as_ref().map(Scenario::hash);
    let label = hash.as_deref().map_or_else(|| format!("seed{seed}"), |h| h[..16].to_string());
    let dir = cli.out.join(format!("{}-{label}", cli.command.name()));
    let pass = outcome.pass();
    let report = json!({
        "command": cli.command.name(),
        "scenario_hash": hash,
        "seed": seed,
        "pass": pass,
        "checks": outcome.checks,
        "result": outcome.result,
        "config": scenario,
    });
    write_run(&dir, &report, &outcome)?;
    for c in &outcome.checks {
        println!("{} {}: {:.6e} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
    println!("{} -> {}", if pass { "PASS" } else { "FAIL" }, dir.display());
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("termhedge: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
