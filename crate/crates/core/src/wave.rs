//! Exact traveling waves: interface width, profiles, and the loading path
//! that is consistent with a wave on the unit interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drive::Drive;
use crate::model::{ModelError, ModelParams, Phase};
use crate::quad::integrate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveError {
    #[error("wave speed must be nonzero and finite, got {0}")]
    ZeroSpeed(f64),
    #[error("width equation did not converge (bracket [{lo}, {hi}] after {iterations} iterations)")]
    NoConvergence { lo: f64, hi: f64, iterations: usize },
    #[error("interface [{lo}, {hi}] at t = {t} is not inside (0, 1)")]
    InterfaceOutOfDomain { lo: f64, hi: f64, t: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `omega < 0`
    Left,
    /// `omega > 0`
    Right,
}

fn check_speed(omega: f64) -> Result<(), WaveError> {
    if omega == 0.0 || !omega.is_finite() {
        Err(WaveError::ZeroSpeed(omega))
    } else {
        Ok(())
    }
}

/// Constants of the reduced width equation `expm1(y) - kappa y - a = 0` with
/// `y = (1 - kappa) w / (kappa tau |omega|)`.
struct WidthEquation {
    kappa: f64,
    a: f64,
    scale: f64,
}

impl WidthEquation {
    fn new(params: &ModelParams, omega: f64) -> Self {
        let k = params.kappa();
        let tw = params.tau() * omega.abs();
        Self {
            kappa: k,
            a: 2.0 * (1.0 - k).powi(2) / (tw * params.delta()),
            scale: k * tw / (1.0 - k),
        }
    }

    fn f(&self, y: f64) -> f64 {
        y.exp_m1() - self.kappa * y - self.a
    }

    fn df(&self, y: f64) -> f64 {
        y.exp() - self.kappa
    }
}

/// Relative residual of the width equation at width `w`.
pub fn width_residual(params: &ModelParams, omega: f64, w: f64) -> f64 {
    let eq = WidthEquation::new(params, omega);
    let y = w / eq.scale;
    eq.f(y).abs() / (1.0 + eq.a + eq.kappa * y)
}

/// The unique positive interface width `Xi_+ - Xi_-` for speed `omega`.
pub fn solve_width(params: &ModelParams, omega: f64) -> Result<f64, WaveError> {
    check_speed(omega)?;
    let eq = WidthEquation::new(params, omega);
    let mut hi = 1.0f64;
    let mut iterations = 0;
    if !(eq.a.is_finite() && eq.scale > 0.0) {
        return Err(WaveError::NoConvergence { lo: 0.0, hi: f64::INFINITY, iterations });
    }
    while !(eq.f(hi) > 0.0) {
        hi *= 2.0;
        iterations += 1;
        if !hi.is_finite() || hi > 1e4 {
            return Err(WaveError::NoConvergence {
                lo: 0.0,
                hi: hi * eq.scale,
                iterations,
            });
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eq.f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..3 {
        let next = y - eq.f(y) / eq.df(y);
        if next.is_finite() && next > 0.0 {
            y = next;
        }
    }
    let w = y * eq.scale;
    if !(w > 0.0) || width_residual(params, omega, w) > 1e-10 {
        return Err(WaveError::NoConvergence {
            lo: lo * eq.scale,
            hi: hi * eq.scale,
            iterations,
        });
    }
    Ok(w)
}

/// Leading-order width `kappa tau |omega| / (1 - kappa) * ln(2 (1 - kappa)^2 / (tau |omega| delta))`.
pub fn asymptotic_width(params: &ModelParams, omega: f64) -> f64 {
    let eq = WidthEquation::new(params, omega);
    eq.scale * eq.a.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TravelingWave {
    pub params: ModelParams,
    pub omega: f64,
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub sigma0: f64,
    pub direction: Direction,
}

pub fn build_wave(params: &ModelParams, omega: f64, xi_center: f64) -> Result<TravelingWave, WaveError> {
    let w = solve_width(params, omega)?;
    let (xi_lo, xi_hi) = (xi_center - 0.5 * w, xi_center + 0.5 * w);
    let (k, d, tau) = (params.kappa(), params.delta(), params.tau());
    let (sigma0, direction) = if omega < 0.0 {
        (1.0 - k - tau * omega * d - d * xi_lo, Direction::Left)
    } else {
        (-1.0 + k - tau * omega * d - d * xi_hi, Direction::Right)
    };
    Ok(TravelingWave {
        params: *params,
        omega,
        xi_lo,
        xi_hi,
        sigma0,
        direction,
    })
}

impl TravelingWave {
    pub fn width(&self) -> f64 {
        self.xi_hi - self.xi_lo
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.xi_lo + self.xi_hi)
    }

    /// Phase region of the comoving coordinate `P`.
    pub fn region(&self, p: f64) -> Phase {
        if p <= self.xi_lo {
            Phase::Minus
        } else if p >= self.xi_hi {
            Phase::Plus
        } else {
            Phase::Spinodal
        }
    }

    /// Amplitude `2 (1 - kappa) + delta (Xi_+ - Xi_-)` of the exponential tail.
    pub fn tail_amplitude(&self) -> f64 {
        2.0 * (1.0 - self.params.kappa()) + self.params.delta() * self.width()
    }

    /// Profile value and derivative at `P`.
    pub fn eval_with_derivative(&self, p: f64) -> (f64, f64) {
        let (k, d, tau) = (self.params.kappa(), self.params.delta(), self.params.tau());
        let to = tau * self.omega;
        let rate = (1.0 - k) / (k * to);
        let amp = self.tail_amplitude();
        // spinodal branch relative to the anchor a with X(a) = anchor_value
        let spinodal = |anchor: f64, anchor_value: f64| {
            let e = (-rate * (p - anchor)).exp_m1();
            let x = anchor_value - k * d / (1.0 - k) * (p - anchor) - k * to * d / (1.0 - k).powi(2) * e;
            let dx = -k * d / (1.0 - k) + d / (1.0 - k) * (e + 1.0);
            (x, dx)
        };
        match (self.direction, self.region(p)) {
            (Direction::Left, Phase::Minus) => (-k + d * (p - self.xi_lo), d),
            (Direction::Left, Phase::Spinodal) => spinodal(self.xi_lo, -k),
            (Direction::Left, Phase::Plus) => {
                let s = (p - self.xi_hi) / to;
                (k + d * (p - self.xi_hi) - amp * s.exp_m1(), d - amp / to * s.exp())
            }
            (Direction::Right, Phase::Minus) => {
                let s = (p - self.xi_lo) / to;
                (-k + d * (p - self.xi_lo) + amp * s.exp_m1(), d + amp / to * s.exp())
            }
            (Direction::Right, Phase::Spinodal) => spinodal(self.xi_hi, k),
            (Direction::Right, Phase::Plus) => (k + d * (p - self.xi_hi), d),
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.eval_with_derivative(p).0
    }

    /// Residual of `-tau omega X' - delta P - Sigma + H'(X) = 0` with the branch
    /// of `H'` fixed by the region of `P` and the analytic derivative.
    pub fn ode_residual(&self, p: f64) -> f64 {
        let (x, dx) = self.eval_with_derivative(p);
        self.ode_residual_with(p, x, dx)
    }

    /// Same residual for a caller-supplied value and derivative.
    pub fn ode_residual_with(&self, p: f64, x: f64, dx: f64) -> f64 {
        let b = self.params.branch(self.region(p));
        -self.params.tau() * self.omega * dx - self.params.delta() * p - self.sigma0 + b.slope * x + b.offset
    }

    /// Multiplier along the wave, `Sigma - delta (omega t - 1/2)`.
    pub fn sigma_tw(&self, t: f64) -> f64 {
        self.sigma0 - self.params.delta() * (self.omega * t - 0.5)
    }

    /// The same wave translated by `c` in `P`.
    pub fn shifted(&self, c: f64) -> TravelingWave {
        let mut w = *self;
        w.xi_lo += c;
        w.xi_hi += c;
        w.sigma0 -= self.params.delta() * c;
        w
    }

    /// Exact `int_0^1 X(p - omega t) dp`, without the domain check.
    pub fn drive_exact(&self, t: f64) -> f64 {
        let a = -self.omega * t;
        let tol = 1e-12 * (1.0 + self.params.delta() + self.tail_amplitude());
        integrate(|p| self.eval(p), a, a + 1.0, tol, &[self.xi_lo, self.xi_hi]).value
    }

    /// Leading-order drive for a jump interface at `Xi + omega t` in `p`.
    pub fn drive_leading(&self, t: f64) -> f64 {
        let (k, d) = (self.params.kappa(), self.params.delta());
        let base = match self.direction {
            Direction::Left => 2.0 - k,
            Direction::Right => k,
        };
        base + 0.5 * d - (2.0 + d) * (self.center() + self.omega * t)
    }

    pub fn drive_rate(&self, t: f64) -> f64 {
        let a = -self.omega * t;
        -self.omega * (self.eval(a + 1.0) - self.eval(a))
    }
}

pub fn eval_profile(wave: &TravelingWave, p: f64) -> f64 {
    wave.eval(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveDriveValue {
    pub exact: f64,
    pub leading: f64,
}

pub fn wave_drive(wave: &TravelingWave, t: f64) -> Result<WaveDriveValue, WaveError> {
    let (lo, hi) = (wave.xi_lo + wave.omega * t, wave.xi_hi + wave.omega * t);
    if !(lo > 0.0 && hi < 1.0) {
        return Err(WaveError::InterfaceOutOfDomain { lo, hi, t });
    }
    Ok(WaveDriveValue {
        exact: wave.drive_exact(t),
        leading: wave.drive_leading(t),
    })
}

/// Loading path that carries a traveling wave exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveDrive(pub TravelingWave);

impl Drive for WaveDrive {
    fn ell(&self, t: f64) -> f64 {
        self.0.drive_exact(t)
    }

    fn elldot(&self, t: f64) -> f64 {
        self.0.drive_rate(t)
    }

    fn turning_points(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// Wave profile in the degenerate case `kappa = 0`, with a single kink at `xi`.
pub fn bilinear_profile(delta: f64, tau: f64, omega: f64, xi: f64, p: f64) -> Result<f64, WaveError> {
    check_speed(omega)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ModelError::Delta(delta).into());
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(ModelError::Tau(tau).into());
    }
    let s = (p - xi) / (tau * omega);
    let tail = if omega < 0.0 && p > xi {
        -2.0 * s.exp_m1()
    } else if omega > 0.0 && p < xi {
        2.0 * s.exp_m1()
    } else {
        0.0
    };
    Ok(delta * (p - xi) + tail)
}
