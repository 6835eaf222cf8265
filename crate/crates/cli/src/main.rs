use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vpdirac_cli::scenario::{self, Kind, Override};
use vpdirac_cli::{run_scenario, Failure, EXIT_CONFIG, EXIT_PASS, EXIT_RUNTIME, EXIT_VERDICT, THREADS_ENV};

/// Particle experiments for Vlasov-Poisson with a point charge.
///
/// Exit codes: 0 every verdict passed, 1 a verdict failed, 2 configuration
/// error, 3 runtime failure. VPDIRAC_THREADS sets the worker thread count.
#[derive(Parser)]
#[command(name = "vpdirac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run with diagnostics along it.
    Simulate(Common),
    /// Runs along a ladder of regularization levels against a reference level.
    Converge(Common),
    /// Flow pairs, the Φ functional and the Chebyshev inequality.
    Stability(Common),
    /// Diagnostics of a stored flow.
    Diagnose(Common),
    /// Verification suite of the grid analysis tools.
    Norms(Common),
    /// Runs a scenario file of any kind.
    Run(Common),
    /// Validates a scenario and prints its canonical form.
    Config(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Defaults apply when omitted.
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set simulation.particles=1024`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = Override::parse)]
    set: Vec<Override>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Regularization level (`simulation.n`).
    #[arg(long)]
    n: Option<u32>,
    /// Particle count (`simulation.particles`).
    #[arg(long)]
    particles: Option<usize>,
    /// Final time (`simulation.horizon`).
    #[arg(long)]
    horizon: Option<f64>,
    /// Sampling seed (`simulation.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Vec<Override> {
        let mut out = self.set.clone();
        let mut push = |key: &str, value: toml::Value| out.push(Override { key: key.into(), value });
        if let Some(o) = &self.output {
            push("output", toml::Value::String(o.display().to_string()));
        }
        if let Some(n) = self.n {
            push("simulation.n", toml::Value::Integer(n.into()));
        }
        if let Some(p) = self.particles {
            push("simulation.particles", toml::Value::Integer(p as i64));
        }
        if let Some(h) = self.horizon {
            push("simulation.horizon", toml::Value::Float(h));
        }
        if let Some(s) = self.seed {
            push("simulation.seed", toml::Value::Integer(s as i64));
        }
        out
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("cannot size the thread pool: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("configuration error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let (kind, common, echo_only) = match &cli.command {
        Command::Simulate(c) => (Some(Kind::Simulate), c, false),
        Command::Converge(c) => (Some(Kind::Converge), c, false),
        Command::Stability(c) => (Some(Kind::Stability), c, false),
        Command::Diagnose(c) => (Some(Kind::Diagnose), c, false),
        Command::Norms(c) => (Some(Kind::Norms), c, false),
        Command::Run(c) => (None, c, false),
        Command::Config(c) => (None, c, true),
    };
    if kind.is_none() && common.config.is_none() && !echo_only {
        eprintln!("configuration error: `run` needs a scenario file");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let scenario = match scenario::load(common.config.as_deref(), kind, &common.overrides()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if echo_only {
        print!("{}", scenario.canonical());
        return ExitCode::from(EXIT_PASS as u8);
    }
    match run_scenario(&scenario) {
        Ok(outcome) => {
            for (name, ok) in &outcome.verdicts {
                println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
            }
            println!("artifacts in {}", outcome.dir.display());
            ExitCode::from(if outcome.passed() { EXIT_PASS } else { EXIT_VERDICT } as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                Failure::Config(_) => EXIT_CONFIG,
                Failure::Runtime(_) => EXIT_RUNTIME,
            } as u8)
        }
    }
}
