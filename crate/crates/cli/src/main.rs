use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bopp_cli::experiments::{cmd_autonomous, cmd_bifurcation, cmd_multiplicity, cmd_solve};
use bopp_cli::verify::{cmd_verify, VerifyOptions};
use bopp_cli::{CliError, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bopp", version, about = "Constrained ground states of a Schrödinger equation with a Bopp-Podolsky term")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random choice (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (overrides `threads`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Progress lines on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Reduced verification suite.
    #[arg(long, global = true)]
    quick: bool,
    /// Scale the kernel by 1 + VALUE during verification (test hook).
    #[arg(long, global = true, hide = true)]
    fault_kernel: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Minimize from the configured start and write one record.
    Solve,
    /// Radial ground state for the constant potential inf V.
    Autonomous,
    /// Sweep the constraint level and tabulate q(c).
    Bifurcation,
    /// Bump-started multi-start search across the eps list.
    Multiplicity,
    /// Run the self-check suite.
    Verify,
}

fn load(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    cfg.verbose |= cli.verbose;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut stdout = std::io::stdout().lock();
    let out = &mut stdout;
    if let Command::Verify = cli.command {
        let seed = match &cli.config {
            Some(_) => load(cli)?.seed,
            None => cli.seed.unwrap_or(0),
        };
        let opts = VerifyOptions { quick: cli.quick, seed, kernel_fault: cli.fault_kernel };
        cmd_verify(&opts, out)?;
        return Ok(());
    }
    let cfg = load(cli)?;
    match cli.command {
        Command::Solve => cmd_solve(&cfg, out)?,
        Command::Autonomous => cmd_autonomous(&cfg, out)?,
        Command::Bifurcation => cmd_bifurcation(&cfg, out)?,
        Command::Multiplicity => cmd_multiplicity(&cfg, out)?,
        Command::Verify => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
