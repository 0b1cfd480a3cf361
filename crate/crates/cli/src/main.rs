use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use hsl_cli::check::{Outcome, RunError};
use hsl_cli::config::ScenarioConfig;
use hsl_cli::pipelines::{exit_code, run, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Estfun,
    Hierarchy,
    Transport,
    Waveop,
    Scatter,
    VerifyAll,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Estfun => Subcommand::Estfun,
            Command::Hierarchy => Subcommand::Hierarchy,
            Command::Transport => Subcommand::Transport,
            Command::Waveop => Subcommand::Waveop,
            Command::Scatter => Subcommand::Scatter,
            Command::VerifyAll => Subcommand::VerifyAll,
        }
    }
}

/// Numerical experiments for long-range Schrödinger asymptotics.
///
/// Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
/// 3 blow-up detected.
#[derive(Debug, Parser)]
#[command(name = "hsl", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML scenario file; defaults are used for anything it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `scenario.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(cli: &Cli) -> Result<ScenarioConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.scenario.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    cfg.apply_env()?;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let sub = Subcommand::from(cli.command);
    let (outcome, err) = match run(sub, &cfg, &cfg.output.dir) {
        Ok(o) => (o, None),
        Err(e) => (Outcome::failed(&e), Some(e)),
    };
    for part in &outcome.parts {
        println!("{}", part.render());
    }
    if let Some(e) = &err {
        eprintln!("error: {e}");
    }
    let code = exit_code(&outcome, err.as_ref());
    println!("{}: {}", sub.name(), if code == 0 { "pass" } else { "FAIL" });
    ExitCode::from(code as u8)
}
