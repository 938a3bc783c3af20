//! Time integration of the constrained particle ensemble on a uniform
//! midpoint grid in `p`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drive::{Drive, DriveError, DrivePath};
use crate::model::{energy_report, ModelError, ModelParams, Phase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("time {t} outside the validity range [0, {max}]")]
    TimeOutOfRange { t: f64, max: f64 },
    #[error("initial interface position must lie in (0, 1), got {0}")]
    InterfacePosition(f64),
    #[error("explicit initial data has {got} values, expected {expected}")]
    ExplicitLength { expected: usize, got: usize },
    #[error("initial mean {mean} does not match ell(0) = {ell}")]
    ConstraintMismatch { mean: f64, ell: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Drive(#[from] DriveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Exact affine solve on the branch active at the start of the step.
    #[default]
    Exponential,
    ExplicitEuler,
    /// Exact flow for the constant multiplier of the step, following each
    /// particle across branch boundaries. Preserves the order of particles.
    ExactFlow,
}

impl Integrator {
    pub fn stability_bound(&self, params: &ModelParams) -> f64 {
        let tau = params.tau();
        match self {
            Integrator::Exponential | Integrator::ExactFlow => tau / 10.0,
            Integrator::ExplicitEuler => tau.min(tau / params.spinodal_slope()) / 10.0,
        }
    }
}

/// Midpoints `(k - 1/2) / n`, `k = 1..=n`.
pub fn midpoint_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| (k as f64 - 0.5) / n as f64).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub pgrid: Vec<f64>,
    pub x: Vec<f64>,
    pub t: f64,
}

impl ParticleState {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self {
            pgrid: midpoint_grid(x.len()),
            x,
            t,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.x)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.x.windows(2).all(|w| w[1] > w[0])
    }

    pub fn min_increment(&self) -> f64 {
        self.x
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Multiplier `tau * elldot + mean(H'(x))`.
pub fn sigma_of_state(params: &ModelParams, state: &ParticleState, elldot: f64) -> f64 {
    params.tau() * elldot + mean_hprime(params, &state.x)
}

fn mean_hprime(params: &ModelParams, x: &[f64]) -> f64 {
    x.iter().map(|&v| params.hprime(v)).sum::<f64>() / x.len() as f64
}

/// Advances the state by `dt`.
///
/// Each particle is advanced on the affine branch it occupies at the start of
/// the step. The constant multiplier used during the step is fixed so that the
/// grid mean increases by exactly `ell(t + dt) - ell(t)`.
pub fn step(
    params: &ModelParams,
    state: &ParticleState,
    drive: &dyn Drive,
    dt: f64,
    integrator: Integrator,
) -> Result<ParticleState, SimError> {
    let mut next = state.clone();
    let mut phi = vec![0.0; state.len()];
    step_in_place(params, &mut next, drive, dt, integrator, &mut phi)?;
    Ok(next)
}

fn step_in_place(
    params: &ModelParams,
    state: &mut ParticleState,
    drive: &dyn Drive,
    dt: f64,
    integrator: Integrator,
    phi: &mut [f64],
) -> Result<(), SimError> {
    if integrator == Integrator::ExactFlow {
        return exact_flow_step(params, state, drive, dt);
    }
    let tau = params.tau();
    let n = state.len() as f64;
    let dell = drive.ell(state.t + dt) - drive.ell(state.t);
    let (mut sum_phi, mut sum_force_phi) = (0.0, 0.0);
    for ((x, &p), ph) in state.x.iter_mut().zip(&state.pgrid).zip(phi.iter_mut()) {
        let b = params.branch(params.classify(*x));
        let weight = match integrator {
            Integrator::Exponential => -(-b.slope * dt / tau).exp_m1() / b.slope,
            Integrator::ExplicitEuler => dt / tau,
            Integrator::ExactFlow => unreachable!("handled above"),
        };
        let force = params.theta_unchecked(p) - (b.slope * *x + b.offset);
        *ph = weight;
        sum_phi += weight;
        sum_force_phi += force * weight;
        // hold the partial update; the multiplier contribution follows below
        *x += force * weight;
    }
    let sigma = (dell - sum_force_phi / n) / (sum_phi / n);
    for (x, &ph) in state.x.iter_mut().zip(phi.iter()) {
        *x += sigma * ph;
    }
    state.t += dt;
    if state.x.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteState { t: state.t });
    }
    Ok(())
}

/// Branch a particle at `x` with velocity sign `v` is about to follow.
fn phase_along(params: &ModelParams, x: f64, v: f64) -> Phase {
    let k = params.kappa();
    if x < -k || (x == -k && v <= 0.0) {
        Phase::Minus
    } else if x > k || (x == k && v >= 0.0) {
        Phase::Plus
    } else {
        Phase::Spinodal
    }
}

/// Position after scaled time `s = dt / tau` under the constant forcing
/// `f = theta + sigma`, and its derivative with respect to `sigma`.
fn flow_particle(params: &ModelParams, f: f64, x0: f64, s: f64) -> (f64, f64) {
    let k = params.kappa();
    let (mut x, mut left, mut sens) = (x0, s, 0.0);
    for _ in 0..4 {
        let v = f - params.hprime(x);
        let phase = phase_along(params, x, v);
        let b = params.branch(phase);
        let m = b.slope;
        let xs = (f - b.offset) / m;
        let exit = match phase {
            Phase::Minus if v > 0.0 => Some(-k),
            Phase::Plus if v < 0.0 => Some(k),
            Phase::Spinodal if v > 0.0 => Some(k),
            Phase::Spinodal if v < 0.0 => Some(-k),
            _ => None,
        };
        let t_exit = exit.and_then(|xb| {
            let r = (xb - xs) / (x - xs);
            let t = -r.ln() / m;
            (r > 0.0 && t.is_finite() && t >= 0.0).then_some((xb, t))
        });
        match t_exit {
            Some((xb, t)) if t < left => {
                sens = (-m * t).exp() * sens - (-m * t).exp_m1() / m;
                x = xb;
                left -= t;
            }
            _ => {
                let e = (-m * left).exp();
                return (xs + (x - xs) * e, e * sens - (-m * left).exp_m1() / m);
            }
        }
    }
    (x, sens)
}

fn exact_flow_step(params: &ModelParams, state: &mut ParticleState, drive: &dyn Drive, dt: f64) -> Result<(), SimError> {
    let s = dt / params.tau();
    let target = state.mean() + drive.ell(state.t + dt) - drive.ell(state.t);
    let theta: Vec<f64> = state.pgrid.iter().map(|&p| params.theta_unchecked(p)).collect();
    let eval = |sigma: f64| {
        let (mut sum, mut dsum) = (0.0, 0.0);
        for (&x, &th) in state.x.iter().zip(&theta) {
            let (y, d) = flow_particle(params, th + sigma, x, s);
            sum += y;
            dsum += d;
        }
        let n = state.x.len() as f64;
        (sum / n - target, dsum / n)
    };
    let mut sigma = sigma_of_state(params, state, (target - state.mean()) / dt);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let tol = 4.0 * f64::EPSILON * (1.0 + target.abs());
    for _ in 0..100 {
        let (g, dg) = eval(sigma);
        if g.abs() <= tol {
            break;
        }
        if g > 0.0 {
            hi = hi.min(sigma);
        } else {
            lo = lo.max(sigma);
        }
        let mut next = sigma - g / dg;
        if !(next > lo && next < hi) {
            next = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                lo + 2.0 * (sigma - lo).abs().max(1.0)
            } else {
                hi - 2.0 * (hi - sigma).abs().max(1.0)
            };
        }
        if next == sigma {
            break;
        }
        sigma = next;
    }
    for (x, &th) in state.x.iter_mut().zip(&theta) {
        *x = flow_particle(params, th + sigma, *x, s).0;
    }
    state.t += dt;
    if state.x.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteState { t: state.t });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceReport {
    pub xi_minus: f64,
    pub xi_plus: f64,
    /// False when the phase pattern is not `Minus* Spinodal* Plus*`.
    pub single: bool,
}

fn crossing(p0: f64, p1: f64, x0: f64, x1: f64, level: f64) -> f64 {
    if x1 == x0 {
        return 0.5 * (p0 + p1);
    }
    let s = ((level - x0) / (x1 - x0)).clamp(0.0, 1.0);
    p0 + s * (p1 - p0)
}

/// Interface positions `xi_minus <= xi_plus` from the first grid crossings of
/// `-kappa` and `+kappa`.
pub fn interfaces(params: &ModelParams, state: &ParticleState) -> InterfaceReport {
    let k = params.kappa();
    let phases: Vec<Phase> = state.x.iter().map(|&v| params.classify(v)).collect();
    let single = phases.windows(2).all(|w| w[0] <= w[1]);
    let (p, x) = (&state.pgrid, &state.x);
    let first_non_minus = phases.iter().position(|&ph| ph != Phase::Minus);
    let first_plus = phases.iter().position(|&ph| ph == Phase::Plus);
    let (i, j) = match (first_non_minus, first_plus) {
        (None, _) => {
            return InterfaceReport {
                xi_minus: 1.0,
                xi_plus: 1.0,
                single,
            }
        }
        (Some(i), Some(j)) => (i, j),
        (Some(i), None) => (i, phases.len()),
    };
    if i == 0 && j == 0 {
        return InterfaceReport {
            xi_minus: 0.0,
            xi_plus: 0.0,
            single,
        };
    }
    if i == j {
        let c = crossing(p[i - 1], p[i], x[i - 1], x[i], 0.0);
        return InterfaceReport {
            xi_minus: c,
            xi_plus: c,
            single,
        };
    }
    let xi_minus = if i == 0 {
        0.0
    } else {
        crossing(p[i - 1], p[i], x[i - 1], x[i], -k)
    };
    let xi_plus = if j == phases.len() {
        1.0
    } else if j == 0 {
        0.0
    } else {
        crossing(p[j - 1], p[j], x[j - 1], x[j], k)
    };
    InterfaceReport {
        xi_minus: xi_minus.min(xi_plus),
        xi_plus: xi_plus.max(xi_minus),
        single,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `delta (p - xi) + sgn(p - xi)`.
    WellPrepared { xi: f64 },
    /// `sgn(p - xi)`.
    Jump { xi: f64 },
    Explicit { x: Vec<f64> },
    /// Sorted uniform samples on `[-1.5, 1.5]`, shifted to the mean `ell(0)`.
    RandomMonotone { seed: u64 },
}

fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

impl InitialData {
    pub fn sample(&self, params: &ModelParams, n: usize, ell0: f64) -> Result<Vec<f64>, SimError> {
        let grid = midpoint_grid(n);
        match self {
            InitialData::WellPrepared { xi } | InitialData::Jump { xi } => {
                if !(*xi > 0.0 && *xi < 1.0) {
                    return Err(SimError::InterfacePosition(*xi));
                }
                let slope = match self {
                    InitialData::WellPrepared { .. } => params.delta(),
                    _ => 0.0,
                };
                Ok(grid.iter().map(|&p| slope * (p - xi) + sgn(p - xi)).collect())
            }
            InitialData::Explicit { x } => {
                if x.len() != n {
                    return Err(SimError::ExplicitLength {
                        expected: n,
                        got: x.len(),
                    });
                }
                Ok(x.clone())
            }
            InitialData::RandomMonotone { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
                x.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let shift = ell0 - mean(&x);
                x.iter_mut().for_each(|v| *v += shift);
                Ok(x)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: ModelParams,
    pub drive: DrivePath,
    pub initial: InitialData,
    pub t_end: f64,
    pub dt: f64,
    pub n: usize,
    #[serde(default)]
    pub integrator: Integrator,
    /// Diagnostics are recorded every `output_stride` steps and at `t_end`.
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn default_stride() -> usize {
    1
}

impl Scenario {
    pub fn new(params: ModelParams, drive: DrivePath, initial: InitialData, t_end: f64, dt: f64, n: usize) -> Self {
        Self {
            params,
            drive,
            initial,
            t_end,
            dt,
            n,
            integrator: Integrator::Exponential,
            output_stride: 1,
            snapshot_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.drive.validate()?;
        if self.n < 2 {
            return Err(SimError::InvalidScenario(format!("need at least 2 particles, got {}", self.n)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(SimError::InvalidScenario(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        if self.output_stride == 0 {
            return Err(SimError::InvalidScenario("output_stride must be positive".into()));
        }
        let bound = self.integrator.stability_bound(&self.params);
        if !(self.dt > 0.0) || self.dt > bound * (1.0 + 1e-12) {
            return Err(SimError::StepTooLarge { dt: self.dt, bound });
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<ParticleState, SimError> {
        let ell0 = self.drive.ell(0.0);
        let x = self.initial.sample(&self.params, self.n, ell0)?;
        let m = mean(&x);
        if (m - ell0).abs() > 1e-8 * (1.0 + ell0.abs()) {
            return Err(SimError::ConstraintMismatch { mean: m, ell: ell0 });
        }
        Ok(ParticleState::new(x, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub sigma: f64,
    pub xi_minus: f64,
    pub xi_plus: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub mean_x: f64,
    pub ell: f64,
}

pub fn diagnose(params: &ModelParams, state: &ParticleState, drive: &dyn Drive) -> (Diagnostics, InterfaceReport) {
    let elldot = drive.elldot(state.t);
    let sigma = sigma_of_state(params, state, elldot);
    let e = energy_report(params, &state.pgrid, &state.x, sigma, elldot);
    let iface = interfaces(params, state);
    (
        Diagnostics {
            t: state.t,
            sigma,
            xi_minus: iface.xi_minus,
            xi_plus: iface.xi_plus,
            energy: e.energy,
            dissipation: e.dissipation,
            mean_x: state.mean(),
            ell: drive.ell(state.t),
        },
        iface,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub diagnostics: Vec<Diagnostics>,
    pub snapshots: Vec<ParticleState>,
    /// First recorded time from which the phase pattern stays single-interface.
    pub single_interface_time: Option<f64>,
    pub monotone_throughout: bool,
    pub final_state: ParticleState,
}

/// Integrates a scenario with a caller-supplied drive, which may differ from
/// the serializable `scenario.drive`.
pub fn run_with_drive(scenario: &Scenario, drive: &dyn Drive, initial: ParticleState) -> Result<RunOutput, SimError> {
    let params = &scenario.params;
    let mut state = initial;
    let mut phi = vec![0.0; state.len()];
    let mut snaps: Vec<f64> = scenario
        .snapshot_times
        .iter()
        .copied()
        .filter(|&s| s >= 0.0 && s <= scenario.t_end)
        .collect();
    snaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    snaps.dedup();
    let mut snap_iter = snaps.into_iter().peekable();

    let mut out = RunOutput {
        diagnostics: Vec::new(),
        snapshots: Vec::new(),
        single_interface_time: None,
        monotone_throughout: state.is_strictly_increasing(),
        final_state: state.clone(),
    };
    let record = |state: &ParticleState, out: &mut RunOutput| {
        let (d, iface) = diagnose(params, state, drive);
        out.diagnostics.push(d);
        if iface.single {
            out.single_interface_time.get_or_insert(state.t);
        } else {
            out.single_interface_time = None;
        }
        out.monotone_throughout &= state.is_strictly_increasing();
    };
    record(&state, &mut out);
    while snap_iter.next_if(|&s| s <= state.t).is_some() {
        out.snapshots.push(state.clone());
    }

    let tol = 1e-12 * scenario.t_end.max(1.0);
    let mut steps = 0usize;
    while state.t < scenario.t_end - tol {
        let mut target = (state.t + scenario.dt).min(scenario.t_end);
        if let Some(&s) = snap_iter.peek() {
            target = target.min(s);
        }
        if scenario.t_end - target < tol {
            target = scenario.t_end;
        }
        let h = target - state.t;
        step_in_place(params, &mut state, drive, h, scenario.integrator, &mut phi)?;
        state.t = target;
        steps += 1;
        let at_end = state.t >= scenario.t_end - tol;
        if steps % scenario.output_stride == 0 || at_end {
            record(&state, &mut out);
        }
        while snap_iter.next_if(|&s| s <= state.t + tol).is_some() {
            out.snapshots.push(state.clone());
        }
    }
    out.final_state = state;
    Ok(out)
}

pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    scenario.validate()?;
    let initial = scenario.initial_state()?;
    run_with_drive(scenario, &scenario.drive, initial)
}

/// Closed-form solution of the well-prepared problem with `ell' = 1`, valid
/// until the interface particle reaches the spinodal region.
///
/// Returns the state on the `n`-point grid and the multiplier at `t`.
pub fn explicit_pre_depinning(
    params: &ModelParams,
    xi_ini: f64,
    n: usize,
    t: f64,
) -> Result<(ParticleState, f64), SimError> {
    let max = 1.0 - params.kappa();
    if !(t >= 0.0 && t <= max) {
        return Err(SimError::TimeOutOfRange { t, max });
    }
    let x0 = InitialData::WellPrepared { xi: xi_ini }.sample(params, n, 0.0)?;
    let x = x0.into_iter().map(|v| v + t).collect();
    let sigma = params.tau() + t + 0.5 * params.delta() - params.delta() * xi_ini;
    Ok((ParticleState::new(x, t), sigma))
}
