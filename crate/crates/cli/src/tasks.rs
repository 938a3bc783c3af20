//! Subcommand bodies. Each builds its artifacts in memory; nothing touches the
//! file system here.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use quenchwave::analysis::{hausdorff, oscillation_metric};
use quenchwave::io::{fmt_e, write_diagnostics, write_header, write_row, write_snapshot};
use quenchwave::limit::{self, current_branch, limit_step, loop_boundary, run_limit, LimitState, LoopPart};
use quenchwave::particle::{self, Diagnostics, RunOutput, Scenario};
use quenchwave::spectral::{
    build_eigenfunction, char_grid, ep_residual, find_spectrum, resolve_width_sign, verdict_from, RescaledRoot,
    SearchOptions, SignDecision, SpectralClass, SpectralProblem, StabilityReport, Window,
};
use quenchwave::wave::{asymptotic_width, build_wave, Direction};
use quenchwave::{Drive, ModelParams};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::{
    CompareConfig, Job, LimitConfig, ParamsConfig, RunConfig, SimulateConfig, SpectrumConfig, SweepConfig, Task,
    WaveConfig,
};
use crate::error::{ConfigError, ErrorRecord};
use crate::output::{to_json, Artifacts, Envelope};

/// Hausdorff resampling spacing for compare metrics.
const HAUSDORFF_SPACING: f64 = 1e-3;

pub fn run_job(cfg: &RunConfig) -> Result<Artifacts> {
    match &cfg.job {
        Job::Sweep { sweep, template } => run_sweep(cfg, sweep, template),
        _ => run_single(cfg),
    }
}

fn run_single(cfg: &RunConfig) -> Result<Artifacts> {
    let params = cfg.params.build()?;
    let ctx = Ctx::new(cfg);
    match &cfg.job {
        Job::Simulate(s) => simulate(&ctx, &params, s),
        Job::Wave(w) => wave(&ctx, &params, w),
        Job::Spectrum(s) => spectrum(&ctx, &params, s),
        Job::Limit(l) => limit(&ctx, &params, l),
        Job::Compare(c) => compare(&ctx, &params, c),
        Job::Sweep { .. } => Err(ConfigError::new("nested sweep").into()),
    }
}

struct Ctx {
    header: Vec<String>,
    echo: Box<RawValue>,
}

impl Ctx {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            header: cfg.header(),
            echo: RawValue::from_string(cfg.echo()).expect("echo is valid JSON"),
        }
    }

    fn json<T: Serialize>(&self, body: T) -> Vec<u8> {
        to_json(&Envelope {
            tool: format!("quenchwave {}", crate::config::VERSION),
            config: &self.echo,
            body,
        })
    }
}

fn csv(header: &[String], columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_header(&mut buf, header, columns).expect("in-memory write");
    for r in rows {
        write_row(&mut buf, &r).expect("in-memory write");
    }
    buf
}

fn scenario(
    params: &ModelParams,
    drive: &quenchwave::DrivePath,
    initial: &particle::InitialData,
    t_end: f64,
    dt: Option<f64>,
    n: usize,
    integrator: particle::Integrator,
) -> Scenario {
    let dt = dt.unwrap_or_else(|| integrator.stability_bound(params));
    let mut sc = Scenario::new(*params, drive.clone(), initial.clone(), t_end, dt, n);
    sc.integrator = integrator;
    sc
}

#[derive(Serialize)]
struct SnapshotEntry {
    file: String,
    t: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    dt: f64,
    steps_recorded: usize,
    t_final: f64,
    single_interface_time: Option<f64>,
    monotone_throughout: bool,
    snapshots: Vec<SnapshotEntry>,
}

fn simulate(ctx: &Ctx, params: &ModelParams, s: &SimulateConfig) -> Result<Artifacts> {
    let mut sc = scenario(params, &s.drive, &s.initial, s.t_end, s.dt, s.n, s.integrator);
    sc.output_stride = s.output_stride;
    sc.snapshot_times = if s.snapshot_times.is_empty() {
        vec![0.0, s.t_end]
    } else {
        s.snapshot_times.clone()
    };
    let out: RunOutput = particle::run(&sc)?;
    let mut art = Artifacts::default();
    let mut diag = Vec::new();
    write_diagnostics(&mut diag, &ctx.header, &out.diagnostics).expect("in-memory write");
    art.add("diagnostics.csv", diag);
    let mut snapshots = Vec::new();
    for (i, snap) in out.snapshots.iter().enumerate() {
        let name = format!("snapshot_{i:03}.csv");
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &ctx.header, snap.t, &snap.pgrid, &snap.x).expect("in-memory write");
        art.add(name.clone(), buf);
        snapshots.push(SnapshotEntry { file: name, t: snap.t });
    }
    art.add(
        "summary.json",
        ctx.json(SimulateSummary {
            dt: sc.dt,
            steps_recorded: out.diagnostics.len(),
            t_final: out.final_state.t,
            single_interface_time: out.single_interface_time,
            monotone_throughout: out.monotone_throughout,
            snapshots,
        }),
    );
    Ok(art)
}

#[derive(Serialize)]
struct WaveRecord {
    omega: f64,
    xi_lo: f64,
    xi_hi: f64,
    sigma0: f64,
    width: f64,
    width_asymptotic: f64,
    direction: Direction,
    tail_amplitude: f64,
}

fn wave(ctx: &Ctx, params: &ModelParams, w: &WaveConfig) -> Result<Artifacts> {
    if w.points < 2 || !(w.p_max > w.p_min) {
        return Err(ConfigError::new("wave window needs p_max > p_min and at least 2 points").into());
    }
    let tw = build_wave(params, w.omega, w.xi_center)?;
    let step = (w.p_max - w.p_min) / (w.points - 1) as f64;
    let rows = (0..w.points).map(|i| {
        let p = w.p_min + step * i as f64;
        vec![p, tw.eval(p)]
    });
    let mut art = Artifacts::default();
    art.add("profile.csv", csv(&ctx.header, &["P", "X"], rows));
    art.add(
        "wave.json",
        ctx.json(WaveRecord {
            omega: tw.omega,
            xi_lo: tw.xi_lo,
            xi_hi: tw.xi_hi,
            sigma0: tw.sigma0,
            width: tw.width(),
            width_asymptotic: asymptotic_width(params, w.omega),
            direction: tw.direction,
            tail_amplitude: tw.tail_amplitude(),
        }),
    );
    Ok(art)
}

#[derive(Serialize)]
struct RootRecord {
    re: f64,
    im: f64,
    tau_lambda_re: f64,
    tau_lambda_im: f64,
    mu_re: f64,
    mu_im: f64,
    class: SpectralClass,
    /// Eigenpair residual of the reconstructed eigenfunction.
    residual: f64,
    char_residual: f64,
    unstable: bool,
}

#[derive(Serialize)]
struct SpectrumRecord {
    half_width: f64,
    coupled: bool,
    roots: Vec<RootRecord>,
    excluded_point: f64,
    excluded_hits: usize,
    epsilon: f64,
    asymptotic_real_part: f64,
    continuous_re_lambda: f64,
    stability: StabilityReport,
    width_sign: Option<SignDecision>,
    window: Window,
}

fn spectrum(ctx: &Ctx, params: &ModelParams, s: &SpectrumConfig) -> Result<Artifacts> {
    let problem = match s.half_width {
        Some(w) => SpectralProblem::free(params, s.omega, w)?,
        None => SpectralProblem::coupled(params, s.omega)?,
    };
    let window = s.window.unwrap_or_else(|| Window::default_for(&problem));
    let report = find_spectrum(&problem, &window, &SearchOptions::default().with_density(s.nx, s.ny))?;
    let mut roots = Vec::with_capacity(report.roots.len());
    for r in &report.roots {
        let ef = build_eigenfunction(&problem, r)?;
        let mu = RescaledRoot::from_lambda(&problem, r.lambda).mu;
        roots.push(RootRecord {
            re: r.lambda.re,
            im: r.lambda.im,
            tau_lambda_re: r.tau_lambda.re,
            tau_lambda_im: r.tau_lambda.im,
            mu_re: mu.re,
            mu_im: mu.im,
            class: r.class,
            residual: ep_residual(&problem, r, &ef),
            char_residual: r.residual,
            unstable: r.is_unstable(),
        });
    }
    let width_sign = match s.half_width {
        None => Some(resolve_width_sign(&problem, &window)?),
        Some(_) => None,
    };
    if s.grid_nx < 2 || s.grid_ny < 2 {
        return Err(ConfigError::new("grid_nx and grid_ny must be at least 2").into());
    }
    let grid = char_grid(&problem, &window, s.grid_nx, s.grid_ny);
    let mut header = ctx.header.clone();
    header.push("re,im are coordinates of tau*lambda".into());
    let rows = grid.into_iter().map(|(x, y, f)| vec![x, y, f.re, f.im, f.norm()]);
    let mut art = Artifacts::default();
    art.add("char_grid.csv", csv(&header, &["re", "im", "f_re", "f_im", "f_abs"], rows));
    art.add(
        "spectrum.json",
        ctx.json(SpectrumRecord {
            half_width: problem.w,
            coupled: s.half_width.is_none(),
            roots,
            excluded_point: report.excluded_tau_lambda,
            excluded_hits: report.excluded_hits,
            epsilon: report.epsilon,
            asymptotic_real_part: report.asymptotic_real_part,
            continuous_re_lambda: report.continuous_re_lambda,
            stability: verdict_from(&problem, &report),
            width_sign,
            window: report.window,
        }),
    );
    Ok(art)
}

#[derive(Serialize)]
struct Corner {
    ell: f64,
    sigma: f64,
    xi: f64,
}

#[derive(Serialize)]
struct LoopRecord {
    parts: [LoopPart; 4],
    /// Closed polygon in the order xi = 1, left-moving, xi = 0, right-moving.
    corners: Vec<Corner>,
}

fn corner(part: &LoopPart, ell: f64) -> Corner {
    let (sigma, xi) = part.at(ell);
    Corner { ell, sigma, xi }
}

fn limit(ctx: &Ctx, params: &ModelParams, l: &LimitConfig) -> Result<Artifacts> {
    l.drive.validate()?;
    let start = LimitState::from_xi(l.xi0, l.drive.ell(0.0), 0.0);
    let samples = run_limit(params, &l.drive, start, l.t_end, l.dt)?;
    let mut buf = Vec::new();
    write_header(&mut buf, &ctx.header, &["t", "sigma", "xi", "ell", "branch"]).expect("in-memory write");
    for s in &samples {
        writeln!(
            buf,
            "{},{},{},{},{}",
            fmt_e(s.t),
            fmt_e(s.sigma),
            fmt_e(s.xi),
            fmt_e(s.ell),
            s.branch.label()
        )
        .expect("in-memory write");
    }
    let boundary = loop_boundary(params);
    let [p1, p2, p3, p4] = &boundary.parts;
    let corners = vec![
        corner(p3, p3.ell_min),
        corner(p4, p4.ell_min),
        corner(p4, p4.ell_max),
        corner(p1, p1.ell_min),
        corner(p2, p2.ell_min),
    ];
    let mut art = Artifacts::default();
    art.add("limit.csv", buf);
    art.add(
        "loop.json",
        ctx.json(LoopRecord {
            parts: boundary.parts,
            corners,
        }),
    );
    Ok(art)
}

#[derive(Serialize)]
struct CompareMetrics {
    samples: usize,
    hausdorff_ell_sigma: f64,
    max_sigma_deviation: f64,
    mean_sigma_deviation: f64,
    max_xi_deviation: f64,
    oscillation_window: (f64, f64),
    oscillation_metric: f64,
}

fn compare(ctx: &Ctx, params: &ModelParams, c: &CompareConfig) -> Result<Artifacts> {
    let sc = scenario(params, &c.drive, &c.initial, c.t_end, c.dt, c.n, c.integrator);
    sc.validate()?;
    let initial = sc.initial_state()?;
    let out = particle::run_with_drive(&sc, &sc.drive, initial.clone())?;
    let mut state = LimitState::from_particle(params, &initial);
    let mut branch = current_branch(&state);
    let mut limit_rows: Vec<(LimitState, limit::Branch)> = Vec::with_capacity(out.diagnostics.len());
    for d in &out.diagnostics {
        let h = d.t - state.t;
        if h > 0.0 {
            (state, branch) = limit_step(params, &state, &sc.drive, h)?;
            state.t = d.t;
        }
        limit_rows.push((state, branch));
    }
    let mut buf = Vec::new();
    write_header(
        &mut buf,
        &ctx.header,
        &["t", "ell", "sigma_particle", "xi_minus", "xi_plus", "sigma_limit", "xi_limit", "branch"],
    )
    .expect("in-memory write");
    for (d, (s, b)) in out.diagnostics.iter().zip(&limit_rows) {
        let cells: Vec<String> = [d.t, d.ell, d.sigma, d.xi_minus, d.xi_plus, s.sigma, s.xi]
            .iter()
            .map(|&v| fmt_e(v))
            .collect();
        writeln!(buf, "{},{}", cells.join(","), b.label()).expect("in-memory write");
    }
    let metrics = compare_metrics(&out.diagnostics, &limit_rows, c.window.unwrap_or((0.0, c.t_end)))?;
    let mut art = Artifacts::default();
    art.add("compare.csv", buf);
    art.add("metrics.json", ctx.json(metrics));
    Ok(art)
}

fn compare_metrics(
    diag: &[Diagnostics],
    limit_rows: &[(LimitState, limit::Branch)],
    window: (f64, f64),
) -> Result<CompareMetrics> {
    let particle_path: Vec<(f64, f64)> = diag.iter().map(|d| (d.ell, d.sigma)).collect();
    let limit_path: Vec<(f64, f64)> = diag.iter().zip(limit_rows).map(|(d, (s, _))| (d.ell, s.sigma)).collect();
    let dev: Vec<f64> = diag.iter().zip(limit_rows).map(|(d, (s, _))| (d.sigma - s.sigma).abs()).collect();
    let max_xi = diag
        .iter()
        .zip(limit_rows)
        .map(|(d, (s, _))| (0.5 * (d.xi_minus + d.xi_plus) - s.xi).abs())
        .fold(0.0, f64::max);
    Ok(CompareMetrics {
        samples: diag.len(),
        hausdorff_ell_sigma: hausdorff(&particle_path, &limit_path, HAUSDORFF_SPACING)?,
        max_sigma_deviation: dev.iter().copied().fold(0.0, f64::max),
        mean_sigma_deviation: dev.iter().sum::<f64>() / dev.len().max(1) as f64,
        max_xi_deviation: max_xi,
        oscillation_window: window,
        oscillation_metric: oscillation_metric(diag, window)?,
    })
}

#[derive(Serialize)]
struct SweepEntry {
    index: usize,
    dir: String,
    params: ParamsConfig,
    ok: bool,
    error: Option<ErrorRecord>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct SweepRecord {
    task: Task,
    runs: Vec<SweepEntry>,
    failed: usize,
}

/// A sweep in which at least one run failed.
#[derive(Debug)]
pub struct SweepFailure {
    pub failed: usize,
    pub total: usize,
    pub partial: Artifacts,
}

impl std::fmt::Display for SweepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} of {} sweep runs failed", self.failed, self.total)
    }
}

impl std::error::Error for SweepFailure {}

pub fn sweep_points(base: &ParamsConfig, sweep: &SweepConfig) -> Vec<ParamsConfig> {
    let or_base = |v: &Vec<f64>, b: f64| if v.is_empty() { vec![b] } else { v.clone() };
    let (ks, ds, ts) = (
        or_base(&sweep.kappa, base.kappa),
        or_base(&sweep.delta, base.delta),
        or_base(&sweep.tau, base.tau),
    );
    let mut out = Vec::with_capacity(ks.len() * ds.len() * ts.len());
    for &kappa in &ks {
        for &delta in &ds {
            for &tau in &ts {
                out.push(ParamsConfig { kappa, delta, tau });
            }
        }
    }
    out
}

fn run_sweep(cfg: &RunConfig, sweep: &SweepConfig, template: &Job) -> Result<Artifacts> {
    let points = sweep_points(&cfg.params, sweep);
    for (i, p) in points.iter().enumerate() {
        p.build().with_context(|| format!("sweep point {i}"))?;
    }
    let runs: Vec<RunConfig> = points
        .iter()
        .enumerate()
        .map(|(i, p)| RunConfig {
            params: *p,
            output_dir: cfg.output_dir.join(run_dir(i)),
            job: template.clone(),
            ..cfg.clone()
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep.jobs.unwrap_or(0))
        .build()
        .context("building sweep worker pool")?;
    let results: Vec<Result<Artifacts>> = pool.install(|| runs.par_iter().map(run_single).collect());

    let mut art = Artifacts::default();
    let mut entries = Vec::with_capacity(runs.len());
    let mut failed = 0;
    for (i, (run, res)) in runs.iter().zip(results).enumerate() {
        let dir = run_dir(i);
        match res {
            Ok(a) => {
                let files = a.names().map(|n| n.display().to_string()).collect();
                art.extend_under(&PathBuf::from(&dir), a);
                entries.push(SweepEntry {
                    index: i,
                    dir,
                    params: run.params,
                    ok: true,
                    error: None,
                    files,
                });
            }
            Err(e) => {
                failed += 1;
                entries.push(SweepEntry {
                    index: i,
                    dir,
                    params: run.params,
                    ok: false,
                    error: Some(ErrorRecord::from_error(&e)),
                    files: Vec::new(),
                });
            }
        }
    }
    let ctx = Ctx::new(cfg);
    art.add(
        "sweep.json",
        ctx.json(SweepRecord {
            task: template.task(),
            runs: entries,
            failed,
        }),
    );
    if failed > 0 {
        return Err(SweepFailure {
            failed,
            total: runs.len(),
            partial: art,
        }
        .into());
    }
    Ok(art)
}

fn run_dir(i: usize) -> String {
    format!("run_{i:03}")
}
