mod checks;
mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use exb_barrier::ControlMode;

use crate::settings::Overrides;

/// Exit statuses.
pub mod exit {
    pub const CONFIG: u8 = 2;
    pub const COMPUTE: u8 = 3;
    pub const VALIDATION: u8 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "exbctl", version, about = "E×B drift transport-barrier simulator")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; flags override individual keys.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Seed for both the potential phases and the initial conditions.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Perturbation amplitude.
    #[arg(long, global = true, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    /// Barrier position.
    #[arg(long, global = true, allow_hyphen_values = true)]
    x0: Option<f64>,
    /// Control variant: none, exact or truncated.
    #[arg(long, global = true)]
    mode: Option<ControlMode>,
    /// Directory for data files, images and config echoes.
    #[arg(long, short, global = true)]
    output_dir: Option<PathBuf>,
    /// Multiply the control term by this factor (1 leaves it intact).
    #[arg(long, global = true, allow_hyphen_values = true)]
    control_scale: Option<f64>,
    /// Trajectories per ensemble.
    #[arg(long, global = true)]
    n_traj: Option<usize>,
    /// Integration time.
    #[arg(long, global = true)]
    t_final: Option<f64>,
    /// Skip PNG output.
    #[arg(long, global = true)]
    no_plots: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Poincaré sections with and without control.
    Portrait,
    /// Energy-cost, escape and comparison tables over the amplitude sweep.
    Tables {
        /// Only the energy table; no ensembles.
        #[arg(long)]
        energy_only: bool,
    },
    /// Reduced oracle suite.
    Validate,
    /// Contour maps of the potential and the control terms.
    Contour,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            epsilon: self.epsilon,
            x0: self.x0,
            mode: self.mode,
            output_dir: self.output_dir.clone(),
            control_scale: self.control_scale,
            n_traj: self.n_traj,
            t_final: self.t_final,
            no_plots: self.no_plots,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match settings::load(cli.global.config.as_deref(), &cli.global.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(exit::CONFIG);
        }
    };
    let outcome = match cli.command {
        Command::Portrait => commands::portrait(&cfg),
        Command::Tables { energy_only } => commands::tables(&cfg, energy_only),
        Command::Validate => commands::validate(&cfg),
        Command::Contour => commands::contour(&cfg),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Validation(n)) => {
            eprintln!("{n} validation check(s) failed");
            ExitCode::from(exit::VALIDATION)
        }
        Err(commands::Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::COMPUTE)
        }
    }
}
