use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use dnls_wkb::report::Check;
use dnls_wkb::{emit_report, load_config, run_single, run_sweep, validate, Report};
use dnls_wkb_core::spectral::{analytic_norm, sobolev_norm};

#[derive(Parser)]
#[command(name = "dnls-wkb", version, about = "WKB asymptotics for semiclassical derivative NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one eps and write report.csv / report.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every eps of `sweep.epsilons` and fit the rates.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the structural checks.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print norms of an initial field (phi0, a0, phi10 or a10).
    Norms {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        field: String,
    },
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!("{}", c.line());
    }
}

fn finish_report(report: &Report, out: &Path) -> Result<bool> {
    let (csv, json) = emit_report(report, out)?;
    for f in &report.failures {
        println!("eps={} aborted: {}", f.epsilon, f.error);
    }
    for flag in &report.flags {
        println!("flag: {flag}");
    }
    print_checks(&report.checks);
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { config, epsilon, out } => {
            let cfg = load_config(&config)?;
            finish_report(&run_single(&cfg, epsilon)?, &out)
        }
        Command::Sweep { config, out } => {
            let cfg = load_config(&config)?;
            finish_report(&run_sweep(&cfg)?, &out)
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let checks = validate(&cfg);
            print_checks(&checks);
            Ok(checks.iter().all(|c| c.pass))
        }
        Command::Norms { config, field } => {
            let cfg = load_config(&config)?;
            let grid = cfg.make_grid()?;
            let state = cfg.initial_state(&grid)?;
            let corr = cfg.initial_corrector(&grid)?;
            let psi = match field.as_str() {
                "phi0" => state.phi,
                "a0" => state.a,
                "phi10" => corr.phi1,
                "a10" => corr.a1,
                other => bail!("unknown field `{other}`; expected phi0, a0, phi10 or a10"),
            };
            let ell = cfg.regularity.ell;
            let w0 = cfg.weight.w0;
            for s in [ell, ell + 0.5, ell + 1.0] {
                println!(
                    "{field}: H^{s} = {:.12e}  H^{s}_w0(w0={w0}) = {:.12e}",
                    sobolev_norm(&psi, s)?,
                    analytic_norm(&psi, w0, s)?
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
