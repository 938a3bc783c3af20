//! Post-processing of simulation output.

use thiserror::Error;

use crate::particle::Diagnostics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no finite-difference samples in window [{0}, {1}]")]
    WindowEmpty(f64, f64),
    #[error("polyline is empty")]
    EmptyPath,
}

/// Population standard deviation of the finite-difference rate of change of
/// the interface width `xi_plus - xi_minus`, over differences whose right
/// endpoint lies in `[t0, t1]`.
pub fn oscillation_metric(series: &[Diagnostics], window: (f64, f64)) -> Result<f64, AnalysisError> {
    let (t0, t1) = window;
    let rates: Vec<f64> = series
        .windows(2)
        .filter(|w| w[1].t >= t0 && w[1].t <= t1 && w[1].t > w[0].t)
        .map(|w| ((w[1].xi_plus - w[1].xi_minus) - (w[0].xi_plus - w[0].xi_minus)) / (w[1].t - w[0].t))
        .collect();
    if rates.is_empty() {
        return Err(AnalysisError::WindowEmpty(t0, t1));
    }
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    Ok((rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt())
}

fn point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - a.0 - s * dx).hypot(p.1 - a.1 - s * dy)
}

/// Points along `path` with spacing at most `spacing`, vertices included.
pub fn resample(path: &[(f64, f64)], spacing: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(path.len());
    if let Some(&first) = path.first() {
        out.push(first);
    }
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let k = (len / spacing).ceil().max(1.0) as usize;
        for j in 1..=k {
            let s = j as f64 / k as f64;
            out.push((a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)));
        }
    }
    out
}

fn distance_to_path(p: (f64, f64), path: &[(f64, f64)]) -> f64 {
    if path.len() == 1 {
        return (p.0 - path[0].0).hypot(p.1 - path[0].1);
    }
    path.windows(2)
        .map(|w| point_segment(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Largest distance from a resampled point of `a` to the polyline `b`.
pub fn directed_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)], spacing: f64) -> Result<f64, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptyPath);
    }
    Ok(resample(a, spacing)
        .into_iter()
        .map(|p| distance_to_path(p, b))
        .fold(0.0, f64::max))
}

/// Symmetric Hausdorff distance between two polylines.
pub fn hausdorff(a: &[(f64, f64)], b: &[(f64, f64)], spacing: f64) -> Result<f64, AnalysisError> {
    Ok(directed_hausdorff(a, b, spacing)?.max(directed_hausdorff(b, a, spacing)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(t: f64, width: f64) -> Diagnostics {
        Diagnostics {
            t,
            sigma: 0.0,
            xi_minus: 0.5 - 0.5 * width,
            xi_plus: 0.5 + 0.5 * width,
            energy: 0.0,
            dissipation: 0.0,
            mean_x: 0.0,
            ell: 0.0,
        }
    }

    #[test]
    fn constant_width_gives_zero() {
        let s: Vec<_> = (0..100).map(|i| diag(i as f64 * 0.01, 0.1)).collect();
        assert_eq!(oscillation_metric(&s, (0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn sinusoid_width() {
        let (a, w) = (0.02, 7.0);
        let n = 20_000;
        let tmax = 2.0 * std::f64::consts::PI / w * 5.0;
        let s: Vec<_> = (0..=n)
            .map(|i| {
                let t = tmax * i as f64 / n as f64;
                diag(t, 0.1 + a * (w * t).sin())
            })
            .collect();
        let m = oscillation_metric(&s, (0.0, tmax)).unwrap();
        assert!((m / (a * w / 2f64.sqrt()) - 1.0).abs() < 0.05);
    }

    #[test]
    fn empty_window() {
        let s: Vec<_> = (0..10).map(|i| diag(i as f64, 0.1)).collect();
        assert!(matches!(oscillation_metric(&s, (20.0, 30.0)), Err(AnalysisError::WindowEmpty(..))));
    }

    #[test]
    fn hausdorff_of_shifted_segment() {
        let a = [(0.0, 0.0), (1.0, 0.0)];
        let b = [(0.0, 0.5), (1.0, 0.5)];
        assert!((hausdorff(&a, &b, 0.01).unwrap() - 0.5).abs() < 1e-15);
        let c = [(0.0, 0.0), (0.5, 0.0), (2.0, 0.0)];
        assert!((hausdorff(&a, &c, 0.01).unwrap() - 1.0).abs() < 1e-15);
        assert!(directed_hausdorff(&a, &c, 0.01).unwrap() < 1e-15);
    }
}
