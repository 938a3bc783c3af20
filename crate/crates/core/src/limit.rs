//! Rate-independent dynamics of a sharp interface in the zero relaxation
//! time limit.
//!
//! The state `(sigma, xi)` always satisfies `sigma + 1 - 2 xi = ell`. The
//! driving indicator `g = sigma + delta (xi - 1/2) = ell + (2 + delta)(xi - 1/2)`
//! decides whether the interface stands or moves: a left moving interface
//! needs `g = 1 - kappa` and increasing `ell`, a right moving one needs
//! `g = -1 + kappa` and decreasing `ell`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drive::Drive;
use crate::model::ModelParams;
use crate::particle::{interfaces, ParticleState};

const PIN_TOL: f64 = 1e-12;
const STATE_TOL: f64 = 1e-9;
const MAX_EVENTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitError {
    #[error("inconsistent limit state: {0}")]
    InconsistentState(String),
    #[error("profile is discontinuous at p = xi = {0}")]
    AtJump(f64),
    #[error("index p must lie in [0, 1], got {0}")]
    IndexOutOfRange(f64),
    #[error("time step must be positive and finite, got {0}")]
    Step(f64),
    #[error("more than {MAX_EVENTS} branch switches in one step")]
    TooManyEvents,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `xi = 0`, `sigma = ell - 1`.
    Part1StandingXi0,
    Part2RightMoving,
    /// `xi = 1`, `sigma = ell + 1`.
    Part3StandingXi1,
    Part4LeftMoving,
    InteriorStanding,
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::Part1StandingXi0 => "part1_standing_xi0",
            Branch::Part2RightMoving => "part2_right_moving",
            Branch::Part3StandingXi1 => "part3_standing_xi1",
            Branch::Part4LeftMoving => "part4_left_moving",
            Branch::InteriorStanding => "interior_standing",
        }
    }

    pub fn is_moving(&self) -> bool {
        matches!(self, Branch::Part2RightMoving | Branch::Part4LeftMoving)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitState {
    pub sigma: f64,
    pub xi: f64,
    pub t: f64,
}

impl LimitState {
    /// State with interface at `xi` and multiplier from the equation of state.
    pub fn from_xi(xi: f64, ell: f64, t: f64) -> Self {
        Self {
            sigma: ell - 1.0 + 2.0 * xi,
            xi,
            t,
        }
    }

    pub fn indicator(&self, params: &ModelParams) -> f64 {
        self.sigma + params.delta() * (self.xi - 0.5)
    }

    pub fn eos_residual(&self, ell: f64) -> f64 {
        self.sigma + 1.0 - 2.0 * self.xi - ell
    }

    pub fn validate(&self, params: &ModelParams, ell: f64) -> Result<(), LimitError> {
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(LimitError::InconsistentState(format!("xi = {} outside [0, 1]", self.xi)));
        }
        let r = self.eos_residual(ell);
        if !(r.abs() <= STATE_TOL * (1.0 + ell.abs())) {
            return Err(LimitError::InconsistentState(format!("equation of state residual {r}")));
        }
        let band = 1.0 - params.kappa();
        let g = self.indicator(params);
        if self.xi > 0.0 && self.xi < 1.0 && g.abs() > band + STATE_TOL {
            return Err(LimitError::InconsistentState(format!(
                "indicator {g} outside [-{band}, {band}] with interior interface"
            )));
        }
        Ok(())
    }

    /// Projection of a particle state: `xi` is the midpoint of the interface
    /// and `sigma` follows from the equation of state with `ell = mean(x)`.
    pub fn from_particle(params: &ModelParams, state: &ParticleState) -> Self {
        let r = interfaces(params, state);
        Self::from_xi(0.5 * (r.xi_minus + r.xi_plus), state.mean(), state.t)
    }
}

/// Piecewise affine quasi-stationary profile with a jump of height 2 at `xi`.
pub fn quasi_stationary_profile(params: &ModelParams, state: &LimitState, p: f64) -> Result<f64, LimitError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(LimitError::IndexOutOfRange(p));
    }
    let base = state.sigma + params.theta_unchecked(p);
    if p < state.xi {
        Ok(base - 1.0)
    } else if p > state.xi {
        Ok(base + 1.0)
    } else {
        Err(LimitError::AtJump(p))
    }
}

/// Where the current branch ends, as a level of `ell`, and what follows.
struct Plan {
    branch: Branch,
    /// `None` when the branch persists for the whole monotone stretch.
    event: Option<(f64, Branch)>,
}

fn plan(params: &ModelParams, xi: f64, ell: f64, rising: bool) -> Plan {
    let (k, d) = (params.kappa(), params.delta());
    let band = 1.0 - k;
    let g = ell + (2.0 + d) * (xi - 0.5);
    // ell at which the indicator meets +band or -band for this xi
    let upper = |xi: f64| band - (2.0 + d) * (xi - 0.5);
    let lower = |xi: f64| -band - (2.0 + d) * (xi - 0.5);
    if xi <= 0.0 {
        return if rising {
            Plan {
                branch: Branch::Part1StandingXi0,
                event: None,
            }
        } else if g <= -band + PIN_TOL {
            Plan {
                branch: Branch::Part2RightMoving,
                event: Some((lower(1.0), Branch::Part3StandingXi1)),
            }
        } else {
            Plan {
                branch: Branch::Part1StandingXi0,
                event: Some((lower(0.0), Branch::Part2RightMoving)),
            }
        };
    }
    if xi >= 1.0 {
        return if !rising {
            Plan {
                branch: Branch::Part3StandingXi1,
                event: None,
            }
        } else if g >= band - PIN_TOL {
            Plan {
                branch: Branch::Part4LeftMoving,
                event: Some((upper(0.0), Branch::Part1StandingXi0)),
            }
        } else {
            Plan {
                branch: Branch::Part3StandingXi1,
                event: Some((upper(1.0), Branch::Part4LeftMoving)),
            }
        };
    }
    if rising && g >= band - PIN_TOL {
        Plan {
            branch: Branch::Part4LeftMoving,
            event: Some((upper(0.0), Branch::Part1StandingXi0)),
        }
    } else if !rising && g <= -band + PIN_TOL {
        Plan {
            branch: Branch::Part2RightMoving,
            event: Some((lower(1.0), Branch::Part3StandingXi1)),
        }
    } else if rising {
        Plan {
            branch: Branch::InteriorStanding,
            event: Some((upper(xi), Branch::Part4LeftMoving)),
        }
    } else {
        Plan {
            branch: Branch::InteriorStanding,
            event: Some((lower(xi), Branch::Part2RightMoving)),
        }
    }
}

/// Interface position after moving along `branch` to the level `ell`.
fn xi_on(params: &ModelParams, branch: Branch, xi: f64, ell: f64) -> f64 {
    let (k, d) = (params.kappa(), params.delta());
    let band = 1.0 - k;
    match branch {
        Branch::Part4LeftMoving => (0.5 + (band - ell) / (2.0 + d)).clamp(0.0, 1.0),
        Branch::Part2RightMoving => (0.5 + (-band - ell) / (2.0 + d)).clamp(0.0, 1.0),
        _ => xi,
    }
}

fn edge_xi(branch: Branch, xi: f64) -> f64 {
    match branch {
        Branch::Part1StandingXi0 => 0.0,
        Branch::Part3StandingXi1 => 1.0,
        _ => xi,
    }
}

/// A stretch of time spent on one branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub branch: Branch,
    pub end: LimitState,
}

/// Advances the limit dynamics by `dt`, splitting the step at every branch
/// switch and every turning point of the drive.
pub fn limit_step_detailed(
    params: &ModelParams,
    state: &LimitState,
    drive: &dyn Drive,
    dt: f64,
) -> Result<Vec<Segment>, LimitError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(LimitError::Step(dt));
    }
    state.validate(params, drive.ell(state.t))?;
    let t1 = state.t + dt;
    let mut cuts = drive.turning_points(state.t, t1);
    cuts.push(t1);
    let mut xi = state.xi;
    let mut t = state.t;
    let mut segments = Vec::new();
    let mut last_branch = current_branch(state);
    for &tb in &cuts {
        let rising = drive.ell(tb) > drive.ell(t);
        let falling = drive.ell(tb) < drive.ell(t);
        if !rising && !falling {
            segments.push(Segment {
                t_start: t,
                t_end: tb,
                branch: last_branch,
                end: LimitState::from_xi(xi, drive.ell(tb), tb),
            });
            t = tb;
            continue;
        }
        let mut events = 0;
        loop {
            let p = plan(params, xi, drive.ell(t), rising);
            let ell_b = drive.ell(tb);
            let crosses = p.event.filter(|&(level, _)| if rising { ell_b > level } else { ell_b < level });
            match crosses {
                Some((level, next)) => {
                    let te = drive.invert(level, t, tb).unwrap_or(tb).clamp(t, tb);
                    xi = edge_xi(next, xi_on(params, p.branch, xi, level));
                    if matches!(p.branch, Branch::Part1StandingXi0 | Branch::Part3StandingXi1) {
                        xi = edge_xi(p.branch, xi);
                    }
                    segments.push(Segment {
                        t_start: t,
                        t_end: te,
                        branch: p.branch,
                        end: LimitState::from_xi(xi, drive.ell(te), te),
                    });
                    t = te;
                    events += 1;
                    if events > MAX_EVENTS {
                        return Err(LimitError::TooManyEvents);
                    }
                }
                None => {
                    xi = edge_xi(p.branch, xi_on(params, p.branch, xi, ell_b));
                    segments.push(Segment {
                        t_start: t,
                        t_end: tb,
                        branch: p.branch,
                        end: LimitState::from_xi(xi, ell_b, tb),
                    });
                    last_branch = p.branch;
                    t = tb;
                    break;
                }
            }
        }
    }
    Ok(segments)
}

/// Standing branch implied by the phase fraction alone.
pub fn current_branch(state: &LimitState) -> Branch {
    if state.xi <= 0.0 {
        Branch::Part1StandingXi0
    } else if state.xi >= 1.0 {
        Branch::Part3StandingXi1
    } else {
        Branch::InteriorStanding
    }
}

pub fn limit_step(
    params: &ModelParams,
    state: &LimitState,
    drive: &dyn Drive,
    dt: f64,
) -> Result<(LimitState, Branch), LimitError> {
    let segs = limit_step_detailed(params, state, drive, dt)?;
    let last = segs.last().expect("a step has at least one segment");
    Ok((last.end, last.branch))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub t: f64,
    pub sigma: f64,
    pub xi: f64,
    pub ell: f64,
    /// Branch of the stretch that ends at this sample.
    pub branch: Branch,
}

/// Integrates from `initial` to `t_end` and records every segment end, so
/// each consecutive pair of samples lies on a single branch.
pub fn run_limit(
    params: &ModelParams,
    drive: &dyn Drive,
    initial: LimitState,
    t_end: f64,
    dt: f64,
) -> Result<Vec<LimitSample>, LimitError> {
    let mut out = vec![LimitSample {
        t: initial.t,
        sigma: initial.sigma,
        xi: initial.xi,
        ell: drive.ell(initial.t),
        branch: current_branch(&initial),
    }];
    let mut state = initial;
    while state.t < t_end - 1e-12 * t_end.abs().max(1.0) {
        let h = dt.min(t_end - state.t);
        for seg in limit_step_detailed(params, &state, drive, h)? {
            if seg.t_end > out.last().map_or(f64::NEG_INFINITY, |s| s.t) || seg.end.xi != state.xi {
                out.push(LimitSample {
                    t: seg.t_end,
                    sigma: seg.end.sigma,
                    xi: seg.end.xi,
                    ell: drive.ell(seg.t_end),
                    branch: seg.branch,
                });
            }
            state = seg.end;
        }
    }
    Ok(out)
}

/// One side of the hysteresis loop: `sigma` and `xi` are affine in `ell` on
/// `[ell_min, ell_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopPart {
    pub branch: Branch,
    pub ell_min: f64,
    pub ell_max: f64,
    pub sigma_slope: f64,
    pub sigma_offset: f64,
    pub xi_slope: f64,
    pub xi_offset: f64,
}

impl LoopPart {
    pub fn at(&self, ell: f64) -> (f64, f64) {
        (
            self.sigma_slope * ell + self.sigma_offset,
            self.xi_slope * ell + self.xi_offset,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopBoundary {
    pub parts: [LoopPart; 4],
}

pub fn loop_boundary(params: &ModelParams) -> LoopBoundary {
    let (k, d) = (params.kappa(), params.delta());
    let band = 1.0 - k;
    let moving = |branch, g: f64, ell_min, ell_max| LoopPart {
        branch,
        ell_min,
        ell_max,
        sigma_slope: d / (2.0 + d),
        sigma_offset: 2.0 * g / (2.0 + d),
        xi_slope: -1.0 / (2.0 + d),
        xi_offset: 0.5 + g / (2.0 + d),
    };
    LoopBoundary {
        parts: [
            LoopPart {
                branch: Branch::Part1StandingXi0,
                ell_min: k + 0.5 * d,
                ell_max: 2.0 - k + 0.5 * d,
                sigma_slope: 1.0,
                sigma_offset: -1.0,
                xi_slope: 0.0,
                xi_offset: 0.0,
            },
            moving(Branch::Part2RightMoving, -band, k - 2.0 - 0.5 * d, k + 0.5 * d),
            LoopPart {
                branch: Branch::Part3StandingXi1,
                ell_min: k - 2.0 - 0.5 * d,
                ell_max: -k - 0.5 * d,
                sigma_slope: 1.0,
                sigma_offset: 1.0,
                xi_slope: 0.0,
                xi_offset: 1.0,
            },
            moving(Branch::Part4LeftMoving, band, -k - 0.5 * d, 2.0 - k + 0.5 * d),
        ],
    }
}

/// Residuals of the two relations that define `branch` at `(sigma, xi, ell)`.
pub fn branch_residual(params: &ModelParams, branch: Branch, sigma: f64, xi: f64, ell: f64) -> Option<[f64; 2]> {
    let (k, d) = (params.kappa(), params.delta());
    let moving = |g: f64| {
        [
            (1.0 + 0.5 * d) * sigma - 0.5 * d * ell - g,
            (2.0 + d) * (xi - 0.5) + ell - g,
        ]
    };
    match branch {
        Branch::Part1StandingXi0 => Some([sigma - ell + 1.0, xi]),
        Branch::Part2RightMoving => Some(moving(-1.0 + k)),
        Branch::Part3StandingXi1 => Some([sigma - ell - 1.0, xi - 1.0]),
        Branch::Part4LeftMoving => Some(moving(1.0 - k)),
        Branch::InteriorStanding => None,
    }
}
