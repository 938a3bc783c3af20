//! Configuration file format, command-line overrides and the resolved
//! `RunConfig` that every artifact echoes.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use quenchwave::particle::{InitialData, Integrator};
use quenchwave::spectral::Window;
use quenchwave::{DrivePath, ModelParams};
use serde::{Deserialize, Serialize};

use crate::cli::{Command, Common};
use crate::error::ConfigError;

pub const OUTPUT_DIR_ENV: &str = "QUENCHWAVE_OUTPUT_DIR";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Simulate,
    Wave,
    Spectrum,
    Limit,
    Sweep,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub kappa: f64,
    pub delta: f64,
    pub tau: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            delta: 1.0,
            tau: 0.05,
        }
    }
}

impl ParamsConfig {
    pub fn build(&self) -> Result<ModelParams> {
        ModelParams::new(self.kappa, self.delta, self.tau).map_err(|e| ConfigError::new(format!("params: {e}")).into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub drive: DrivePath,
    pub initial: InitialData,
    pub t_end: f64,
    /// Defaults to `tau / 10`.
    pub dt: Option<f64>,
    pub n: usize,
    pub integrator: Integrator,
    pub output_stride: usize,
    pub snapshot_times: Vec<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            drive: DrivePath::sine(),
            initial: InitialData::Jump { xi: 0.5 },
            t_end: 2.0 * PI,
            dt: None,
            n: 2000,
            integrator: Integrator::Exponential,
            output_stride: 1,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveConfig {
    pub omega: f64,
    pub xi_center: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub points: usize,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            omega: -1.0,
            xi_center: 0.5,
            p_min: 0.0,
            p_max: 1.0,
            points: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub omega: f64,
    /// Free half width; the wave-consistent value is used when absent.
    pub half_width: Option<f64>,
    /// Search rectangle in `tau lambda` units.
    pub window: Option<Window>,
    pub nx: usize,
    pub ny: usize,
    pub grid_nx: usize,
    pub grid_ny: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            half_width: None,
            window: None,
            nx: 80,
            ny: 80,
            grid_nx: 200,
            grid_ny: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitConfig {
    pub drive: DrivePath,
    pub xi0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            drive: DrivePath::sine(),
            xi0: 0.5,
            t_end: 2.0 * PI,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub drive: DrivePath,
    pub initial: InitialData,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub n: usize,
    pub integrator: Integrator,
    /// Time window for the oscillation metric; the whole run when absent.
    pub window: Option<(f64, f64)>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            drive: DrivePath::sine(),
            initial: InitialData::Jump { xi: 0.5 },
            t_end: 2.0 * PI,
            dt: None,
            n: 2000,
            integrator: Integrator::Exponential,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub task: Task,
    pub kappa: Vec<f64>,
    pub delta: Vec<f64>,
    pub tau: Vec<f64>,
    pub jobs: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            task: Task::Simulate,
            kappa: Vec::new(),
            delta: Vec::new(),
            tau: Vec::new(),
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub params: ParamsConfig,
    pub simulate: SimulateConfig,
    pub wave: WaveConfig,
    pub spectrum: SpectrumConfig,
    pub limit: LimitConfig,
    pub compare: CompareConfig,
    pub sweep: SweepConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError::new(e.to_string()).into())
    }
}

/// Task-specific part of a resolved run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "settings", rename_all = "snake_case")]
pub enum Job {
    Simulate(SimulateConfig),
    Wave(WaveConfig),
    Spectrum(SpectrumConfig),
    Limit(LimitConfig),
    Compare(CompareConfig),
    Sweep { sweep: SweepConfig, template: Box<Job> },
}

impl Job {
    pub fn task(&self) -> Task {
        match self {
            Job::Simulate(_) => Task::Simulate,
            Job::Wave(_) => Task::Wave,
            Job::Spectrum(_) => Task::Spectrum,
            Job::Limit(_) => Task::Limit,
            Job::Compare(_) => Task::Compare,
            Job::Sweep { .. } => Task::Sweep,
        }
    }

    fn from_file(task: Task, file: &FileConfig) -> Result<Job> {
        Ok(match task {
            Task::Simulate => Job::Simulate(file.simulate.clone()),
            Task::Wave => Job::Wave(file.wave.clone()),
            Task::Spectrum => Job::Spectrum(file.spectrum.clone()),
            Task::Limit => Job::Limit(file.limit.clone()),
            Task::Compare => Job::Compare(file.compare.clone()),
            Task::Sweep => return Err(ConfigError::new("a sweep cannot run another sweep").into()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub params: ParamsConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub job: Job,
}

impl RunConfig {
    /// Merges the optional config file, command-line flags and environment.
    pub fn resolve(command: &Command, env_output_dir: Option<PathBuf>) -> Result<RunConfig> {
        let common = command.common();
        let mut file = match &common.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        apply_common(&mut file.params, common);
        let seed = common.seed.or(file.seed).unwrap_or(0);
        let output_dir = common
            .output_dir
            .clone()
            .or(file.output_dir.clone())
            .or(env_output_dir)
            .unwrap_or_else(|| PathBuf::from("out"));
        let job = match command {
            Command::Simulate { args, .. } => {
                let s = &mut file.simulate;
                set(&mut s.t_end, args.t_end);
                if args.dt.is_some() {
                    s.dt = args.dt;
                }
                set(&mut s.n, args.n);
                set(&mut s.integrator, args.integrator.map(Into::into));
                set(&mut s.output_stride, args.output_stride);
                Job::Simulate(file.simulate.clone())
            }
            Command::Wave { args, .. } => {
                let w = &mut file.wave;
                set(&mut w.omega, args.omega);
                set(&mut w.xi_center, args.xi_center);
                set(&mut w.p_min, args.p_min);
                set(&mut w.p_max, args.p_max);
                set(&mut w.points, args.points);
                Job::Wave(file.wave.clone())
            }
            Command::Spectrum { args, .. } => {
                let s = &mut file.spectrum;
                set(&mut s.omega, args.omega);
                if args.half_width.is_some() {
                    s.half_width = args.half_width;
                }
                set(&mut s.nx, args.nx);
                set(&mut s.ny, args.ny);
                set(&mut s.grid_nx, args.grid_nx);
                set(&mut s.grid_ny, args.grid_ny);
                if let (Some(re_min), Some(re_max), Some(im_max)) = (args.re_min, args.re_max, args.im_max) {
                    s.window = Some(Window {
                        re_min,
                        re_max,
                        im_min: -im_max,
                        im_max,
                    });
                } else if args.re_min.is_some() || args.re_max.is_some() || args.im_max.is_some() {
                    return Err(ConfigError::new("--re-min, --re-max and --im-max must be given together").into());
                }
                Job::Spectrum(file.spectrum.clone())
            }
            Command::Limit { args, .. } => {
                let l = &mut file.limit;
                set(&mut l.xi0, args.xi0);
                set(&mut l.t_end, args.t_end);
                set(&mut l.dt, args.dt);
                Job::Limit(file.limit.clone())
            }
            Command::Compare { args, .. } => {
                let c = &mut file.compare;
                set(&mut c.t_end, args.t_end);
                if args.dt.is_some() {
                    c.dt = args.dt;
                }
                set(&mut c.n, args.n);
                Job::Compare(file.compare.clone())
            }
            Command::Sweep { args, .. } => {
                let s = &mut file.sweep;
                set(&mut s.task, args.task);
                for (dst, src) in [
                    (&mut s.kappa, &args.kappa_list),
                    (&mut s.delta, &args.delta_list),
                    (&mut s.tau, &args.tau_list),
                ] {
                    if !src.is_empty() {
                        *dst = src.clone();
                    }
                }
                if args.jobs.is_some() {
                    s.jobs = args.jobs;
                }
                let template = Box::new(Job::from_file(s.task, &file)?);
                Job::Sweep {
                    sweep: file.sweep.clone(),
                    template,
                }
            }
        };
        let cfg = RunConfig {
            version: VERSION.to_string(),
            params: file.params,
            seed,
            output_dir,
            job,
        };
        cfg.params.build()?;
        Ok(cfg.with_seed_applied())
    }

    /// Random initial data takes the run seed.
    fn with_seed_applied(mut self) -> Self {
        let seed = self.seed;
        let apply = |init: &mut InitialData| {
            if let InitialData::RandomMonotone { seed: s } = init {
                *s = seed;
            }
        };
        match &mut self.job {
            Job::Simulate(s) => apply(&mut s.initial),
            Job::Compare(c) => apply(&mut c.initial),
            Job::Sweep { template, .. } => match template.as_mut() {
                Job::Simulate(s) => apply(&mut s.initial),
                Job::Compare(c) => apply(&mut c.initial),
                _ => {}
            },
            _ => {}
        }
        self
    }

    /// Single-line JSON echo used in artifact headers.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn header(&self) -> Vec<String> {
        vec![format!("quenchwave {}", self.version), format!("config: {}", self.echo())]
    }
}

fn apply_common(params: &mut ParamsConfig, common: &Common) {
    set(&mut params.kappa, common.kappa);
    set(&mut params.delta, common.delta);
    set(&mut params.tau, common.tau);
}

fn set<T>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}
