//! Prescribed loading paths `ell(t)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriveError {
    #[error("piecewise linear drive needs at least two knots")]
    TooFewKnots,
    #[error("knot times must be strictly increasing and finite (knot {0})")]
    UnorderedKnots(usize),
    #[error("drive coefficient {name} is not finite")]
    NonFinite { name: &'static str },
}

/// A continuous, piecewise differentiable loading path.
pub trait Drive: Sync {
    fn ell(&self, t: f64) -> f64;
    fn elldot(&self, t: f64) -> f64;

    /// Times in the open interval `(t0, t1)` where `elldot` may change sign
    /// or jump. Between consecutive points `ell` is monotone.
    fn turning_points(&self, t0: f64, t1: f64) -> Vec<f64>;

    /// Time `s` in `[t0, t1]` with `ell(s) = target`, assuming `ell` is
    /// monotone on the interval and the target is bracketed.
    fn invert(&self, target: f64, t0: f64, t1: f64) -> Option<f64> {
        bisect_drive(|t| self.ell(t), target, t0, t1)
    }
}

pub(crate) fn bisect_drive<F: Fn(f64) -> f64>(ell: F, target: f64, t0: f64, t1: f64) -> Option<f64> {
    let f0 = ell(t0) - target;
    let f1 = ell(t1) - target;
    if f0 == 0.0 {
        return Some(t0);
    }
    if f1 == 0.0 {
        return Some(t1);
    }
    if f0.signum() == f1.signum() {
        return None;
    }
    let (mut a, mut b) = (t0, t1);
    let rising = f1 > 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = ell(m) - target;
        if (fm > 0.0) == rising {
            b = m;
        } else {
            a = m;
        }
    }
    Some(0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DrivePath {
    /// `ell(t) = offset + rate * t`.
    Linear { rate: f64, offset: f64 },
    /// `ell(t) = amplitude * sin(frequency * t + phase)`.
    Sinusoidal { amplitude: f64, frequency: f64, phase: f64 },
    /// Linear interpolation through `(t, ell)` knots, constant outside.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl DrivePath {
    pub fn linear(rate: f64, offset: f64) -> Self {
        DrivePath::Linear { rate, offset }
    }

    pub fn sine() -> Self {
        DrivePath::Sinusoidal {
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), DriveError> {
        let finite = |v: f64, name| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(DriveError::NonFinite { name })
            }
        };
        match self {
            DrivePath::Linear { rate, offset } => {
                finite(*rate, "rate")?;
                finite(*offset, "offset")
            }
            DrivePath::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => {
                finite(*amplitude, "amplitude")?;
                finite(*frequency, "frequency")?;
                finite(*phase, "phase")
            }
            DrivePath::PiecewiseLinear { knots } => {
                if knots.len() < 2 {
                    return Err(DriveError::TooFewKnots);
                }
                for (i, w) in knots.windows(2).enumerate() {
                    if !(w[0].0.is_finite() && w[1].0 > w[0].0 && w[1].0.is_finite()) {
                        return Err(DriveError::UnorderedKnots(i + 1));
                    }
                }
                knots.iter().try_for_each(|k| finite(k.1, "knot value"))
            }
        }
    }

    fn segment(knots: &[(f64, f64)], t: f64) -> usize {
        knots.partition_point(|k| k.0 <= t).clamp(1, knots.len() - 1) - 1
    }
}

impl Drive for DrivePath {
    fn ell(&self, t: f64) -> f64 {
        match self {
            DrivePath::Linear { rate, offset } => offset + rate * t,
            DrivePath::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
            DrivePath::PiecewiseLinear { knots } => {
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let i = Self::segment(knots, t);
                let (a, b) = (knots[i], knots[i + 1]);
                a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
            }
        }
    }

    fn elldot(&self, t: f64) -> f64 {
        match self {
            DrivePath::Linear { rate, .. } => *rate,
            DrivePath::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => amplitude * frequency * (frequency * t + phase).cos(),
            DrivePath::PiecewiseLinear { knots } => {
                if t < knots[0].0 || t >= knots[knots.len() - 1].0 {
                    return 0.0;
                }
                let i = Self::segment(knots, t);
                let (a, b) = (knots[i], knots[i + 1]);
                (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }

    fn turning_points(&self, t0: f64, t1: f64) -> Vec<f64> {
        match self {
            DrivePath::Linear { .. } => Vec::new(),
            DrivePath::Sinusoidal { frequency, phase, .. } => {
                if *frequency == 0.0 {
                    return Vec::new();
                }
                // zeros of cos(frequency t + phase): frequency t + phase = pi/2 + k pi
                let f = *frequency;
                let to_k = |t: f64| (f * t + phase - std::f64::consts::FRAC_PI_2) / std::f64::consts::PI;
                let (ka, kb) = {
                    let (a, b) = (to_k(t0), to_k(t1));
                    (a.min(b), a.max(b))
                };
                let mut out: Vec<f64> = ((ka.floor() as i64)..=(kb.ceil() as i64))
                    .map(|k| (std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI - phase) / f)
                    .filter(|&t| t > t0 && t < t1)
                    .collect();
                out.sort_by(|a, b| a.partial_cmp(b).unwrap());
                out
            }
            DrivePath::PiecewiseLinear { knots } => {
                knots.iter().map(|k| k.0).filter(|&t| t > t0 && t < t1).collect()
            }
        }
    }

    fn invert(&self, target: f64, t0: f64, t1: f64) -> Option<f64> {
        match self {
            DrivePath::Linear { rate, offset } if *rate != 0.0 => {
                let s = (target - offset) / rate;
                let (lo, hi) = (t0.min(t1), t0.max(t1));
                let tol = 1e-14 * (1.0 + lo.abs().max(hi.abs()));
                (s >= lo - tol && s <= hi + tol).then(|| s.clamp(lo, hi))
            }
            _ => bisect_drive(|t| self.ell(t), target, t0, t1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn linear_drive() {
        let d = DrivePath::linear(2.0, -1.0);
        assert_eq!(d.ell(0.5), 0.0);
        assert_eq!(d.elldot(3.0), 2.0);
        assert!(d.turning_points(0.0, 10.0).is_empty());
        assert_eq!(d.invert(1.0, 0.0, 2.0), Some(1.0));
        assert_eq!(d.invert(10.0, 0.0, 2.0), None);
    }

    #[test]
    fn sine_turning_points() {
        let d = DrivePath::sine();
        let tp = d.turning_points(0.0, 2.0 * PI);
        assert_eq!(tp.len(), 2);
        assert!((tp[0] - PI / 2.0).abs() < 1e-14);
        assert!((tp[1] - 1.5 * PI).abs() < 1e-14);
        let s = d.invert(0.5, 0.0, PI / 2.0).unwrap();
        assert!((s - PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn piecewise_linear_interpolates() {
        let d = DrivePath::PiecewiseLinear {
            knots: vec![(0.0, 0.0), (1.0, 2.0), (3.0, 0.0)],
        };
        d.validate().unwrap();
        assert_eq!(d.ell(0.5), 1.0);
        assert_eq!(d.ell(2.0), 1.0);
        assert_eq!(d.ell(5.0), 0.0);
        assert_eq!(d.elldot(0.5), 2.0);
        assert_eq!(d.elldot(2.0), -1.0);
        assert_eq!(d.turning_points(0.0, 3.0), vec![1.0]);
    }

    #[test]
    fn rejects_bad_knots() {
        let d = DrivePath::PiecewiseLinear {
            knots: vec![(0.0, 0.0), (0.0, 1.0)],
        };
        assert_eq!(d.validate(), Err(DriveError::UnorderedKnots(1)));
        let d = DrivePath::PiecewiseLinear { knots: vec![(0.0, 0.0)] };
        assert_eq!(d.validate(), Err(DriveError::TooFewKnots));
    }

    #[test]
    fn serde_round_trip() {
        let d = DrivePath::Sinusoidal {
            amplitude: 1.5,
            frequency: 2.0,
            phase: 0.25,
        };
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"kind\":\"sinusoidal\""));
        let back: DrivePath = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
