use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use quenchwave::particle::Integrator;

use crate::config::Task;

#[derive(Debug, Parser)]
#[command(name = "quenchwave", version, about = "Bistable particle ensembles, traveling waves, spectra and limit loops")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [env: QUENCHWAVE_OUTPUT_DIR, default: ./out]
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the particle ensemble.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SimulateArgs,
    },
    /// Build a traveling-wave profile.
    Wave {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: WaveArgs,
    },
    /// Locate eigenvalues of the linearized wave problem.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SpectrumArgs,
    },
    /// Run the rate-independent limit model.
    Limit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: LimitArgs,
    },
    /// Run particle and limit models on the same drive.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: CompareArgs,
    },
    /// Repeat a task over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SweepArgs,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Wave { common, .. }
            | Command::Spectrum { common, .. }
            | Command::Limit { common, .. }
            | Command::Compare { common, .. }
            | Command::Sweep { common, .. } => common,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Time step [default: the integrator stability bound, tau / 10 for exponential]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of particles.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
    #[arg(long)]
    pub output_stride: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct WaveArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub xi_center: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Free half width instead of the wave-consistent one.
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub re_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub re_max: Option<f64>,
    #[arg(long)]
    pub im_max: Option<f64>,
    /// Seed grid density for the root search.
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    /// Resolution of the characteristic-function dump.
    #[arg(long)]
    pub grid_nx: Option<usize>,
    #[arg(long)]
    pub grid_ny: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct LimitArgs {
    #[arg(long)]
    pub xi0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    #[arg(long, value_delimiter = ',')]
    pub kappa_list: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub delta_list: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub tau_list: Vec<f64>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum IntegratorArg {
    Exponential,
    ExplicitEuler,
    ExactFlow,
}

impl From<IntegratorArg> for Integrator {
    fn from(a: IntegratorArg) -> Self {
        match a {
            IntegratorArg::Exponential => Integrator::Exponential,
            IntegratorArg::ExplicitEuler => Integrator::ExplicitEuler,
            IntegratorArg::ExactFlow => Integrator::ExactFlow,
        }
    }
}
