use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use encircle_cli::commands::{cmd_check, cmd_field, cmd_fit, cmd_run};
use encircle_cli::{load_scenario_with, CliError, LoadedScenario, Overrides};

/// Boundary encircling with Fourier-fitted curves, guiding vector fields and a
/// CBF safety filter.
#[derive(Parser)]
#[command(name = "encircle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every boundary segment; writes curves.toml and fit_report.txt.
    Fit(Common),
    /// Sample the guiding vector field on a grid; writes field.txt.
    Field(Common),
    /// Simulate the closed loop; writes trajectory.txt and summary.toml.
    Run(Common),
    /// Load and validate the scenario only.
    Check(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (defaults to the scenario's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(LoadedScenario, PathBuf), CliError> {
        let ov = Overrides {
            dt: self.dt,
            t_end: self.t_end,
            seed: self.seed,
        };
        let ls = load_scenario_with(&self.scenario, ov)?;
        let out = self.out.clone().unwrap_or_else(|| ls.scenario.output.dir.clone());
        Ok((ls, out))
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(c) => {
            let (ls, out) = c.load()?;
            for p in cmd_fit(&ls, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Field(c) => {
            let (ls, out) = c.load()?;
            for p in cmd_field(&ls, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Run(c) => {
            let (ls, out) = c.load()?;
            let r = cmd_run(&ls, &out)?;
            for p in &r.files {
                println!("{}", p.display());
            }
            let s = &r.summary.run;
            println!(
                "converged {} time_to_converge {} laps {:.3} min_clearance {:.4e} max_wheel_speed {:.6}",
                s.converged,
                s.time_to_converge.map_or("-".to_string(), |t| format!("{t:.3}")),
                s.laps,
                s.min_clearance_overall,
                s.max_wheel_speed
            );
        }
        Command::Check(c) => {
            let (ls, _) = c.load()?;
            print!("{}", cmd_check(&ls));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{} {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
