//! Constitutive laws shared by every other module: the trilinear bistable
//! nonlinearity, its piecewise quadratic potential, the linear disorder
//! function, and the energy/dissipation functionals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("kappa must lie in (0, 1), got {0}")]
    Kappa(f64),
    #[error("delta must be positive and finite, got {0}")]
    Delta(f64),
    #[error("tau must be positive and finite, got {0}")]
    Tau(f64),
    #[error("disorder index p must lie in [0, 1], got {0}")]
    IndexOutOfRange(f64),
}

/// The parameter triple `(kappa, delta, tau)`.
///
/// `kappa` is the half-width of the spinodal interval, `delta` the strength of
/// the quenched disorder and `tau` the relaxation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    kappa: f64,
    delta: f64,
    tau: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    kappa: f64,
    delta: f64,
    tau: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = ModelError;
    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        ModelParams::new(raw.kappa, raw.delta, raw.tau)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            kappa: p.kappa,
            delta: p.delta,
            tau: p.tau,
        }
    }
}

/// Phase of a single particle. Boundary values `x = -kappa` and `x = +kappa`
/// belong to the outer phases, so the spinodal set is open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Minus,
    Spinodal,
    Plus,
}

/// Affine branch `H'(x) = slope * x + offset` that is active at some `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub slope: f64,
    pub offset: f64,
}

impl ModelParams {
    pub fn new(kappa: f64, delta: f64, tau: f64) -> Result<Self, ModelError> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(ModelError::Kappa(kappa));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ModelError::Delta(delta));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ModelError::Tau(tau));
        }
        Ok(Self { kappa, delta, tau })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self, ModelError> {
        Self::new(self.kappa, self.delta, tau)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self, ModelError> {
        Self::new(self.kappa, delta, self.tau)
    }

    /// Magnitude `(1 - kappa) / kappa` of the negative slope inside the
    /// spinodal interval.
    pub fn spinodal_slope(&self) -> f64 {
        (1.0 - self.kappa) / self.kappa
    }

    /// The trilinear bistable function `H'`.
    pub fn hprime(&self, x: f64) -> f64 {
        let b = self.branch(self.classify(x));
        b.slope * x + b.offset
    }

    /// The piecewise quadratic double-well potential `H` with `H' = hprime`.
    pub fn hpotential(&self, x: f64) -> f64 {
        let k = self.kappa;
        match self.classify(x) {
            Phase::Minus => 0.5 * (x + 1.0) * (x + 1.0),
            Phase::Spinodal => 0.5 * self.spinodal_slope() * (k - x * x),
            Phase::Plus => 0.5 * (x - 1.0) * (x - 1.0),
        }
    }

    /// Linear disorder `theta(p) = delta * (p - 1/2)` on `p in [0, 1]`.
    pub fn theta(&self, p: f64) -> Result<f64, ModelError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::IndexOutOfRange(p));
        }
        Ok(self.theta_unchecked(p))
    }

    pub(crate) fn theta_unchecked(&self, p: f64) -> f64 {
        self.delta * (p - 0.5)
    }

    pub fn classify(&self, x: f64) -> Phase {
        if x <= -self.kappa {
            Phase::Minus
        } else if x >= self.kappa {
            Phase::Plus
        } else {
            Phase::Spinodal
        }
    }

    pub fn branch(&self, phase: Phase) -> Branch {
        match phase {
            Phase::Minus => Branch {
                slope: 1.0,
                offset: 1.0,
            },
            Phase::Spinodal => Branch {
                slope: -self.spinodal_slope(),
                offset: 0.0,
            },
            Phase::Plus => Branch {
                slope: 1.0,
                offset: -1.0,
            },
        }
    }
}

/// Total energy, dissipation and loading power of a discretized state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub dissipation: f64,
    pub power: f64,
}

/// Midpoint-rule energy and dissipation of the state `x` sampled at `pgrid`.
///
/// `energy = mean(H(x) - theta x)`, `dissipation = mean((theta + sigma - H'(x))^2)`
/// and `power = sigma * elldot`.
pub fn energy_report(
    params: &ModelParams,
    pgrid: &[f64],
    x: &[f64],
    sigma: f64,
    elldot: f64,
) -> EnergyReport {
    debug_assert_eq!(pgrid.len(), x.len());
    let n = x.len() as f64;
    let (mut energy, mut dissipation) = (0.0, 0.0);
    for (&p, &xk) in pgrid.iter().zip(x) {
        let th = params.theta_unchecked(p);
        energy += params.hpotential(xk) - th * xk;
        let force = th + sigma - params.hprime(xk);
        dissipation += force * force;
    }
    EnergyReport {
        energy: energy / n,
        dissipation: dissipation / n,
        power: sigma * elldot,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(kappa: f64) -> ModelParams {
        ModelParams::new(kappa, 1.0, 0.1).unwrap()
    }

    fn midpoints(n: usize) -> Vec<f64> {
        (1..=n).map(|k| (k as f64 - 0.5) / n as f64).collect()
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(matches!(ModelParams::new(0.0, 1.0, 0.1), Err(ModelError::Kappa(_))));
        assert!(matches!(ModelParams::new(1.0, 1.0, 0.1), Err(ModelError::Kappa(_))));
        assert!(matches!(ModelParams::new(0.5, 0.0, 0.1), Err(ModelError::Delta(_))));
        assert!(matches!(ModelParams::new(0.5, 1.0, -1.0), Err(ModelError::Tau(_))));
        assert!(matches!(ModelParams::new(0.5, f64::NAN, 0.1), Err(ModelError::Delta(_))));
    }

    #[test]
    fn hprime_values() {
        let p = params(0.5);
        assert_eq!(p.hprime(0.0), 0.0);
        assert_eq!(p.hprime(1.0), 0.0);
        // both adjoining branches give 0.5 at the left kink
        assert!((p.hprime(-0.5) - 0.5).abs() < 1e-15);
        for phase in [Phase::Minus, Phase::Spinodal] {
            let b = p.branch(phase);
            assert!((b.slope * -0.5 + b.offset - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn hpotential_values() {
        let p = params(0.5);
        assert_eq!(p.hpotential(-1.0), 0.0);
        assert!((p.hpotential(0.5) - 0.125).abs() < 1e-15);
        assert!((p.hpotential(0.5 - 1e-13) - 0.125).abs() < 1e-12);
        assert!((p.hpotential(0.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn theta_values() {
        let p = ModelParams::new(0.5, 2.5, 0.1).unwrap();
        assert_eq!(p.theta(0.5).unwrap(), 0.0);
        assert!((p.theta(1.0).unwrap() - 1.25).abs() < 1e-15);
        let q = ModelParams::new(0.5, 0.5, 0.1).unwrap();
        assert!((q.theta(0.0).unwrap() + 0.25).abs() < 1e-15);
        assert!(matches!(q.theta(1.5), Err(ModelError::IndexOutOfRange(_))));
        assert!(q.theta(-1e-9).is_err());
    }

    #[test]
    fn classify_boundaries() {
        let p = params(0.5);
        assert_eq!(p.classify(0.0), Phase::Spinodal);
        assert_eq!(p.classify(-0.5), Phase::Minus);
        assert_eq!(p.classify(0.5), Phase::Plus);
        assert_eq!(p.classify(2.0), Phase::Plus);
    }

    #[test]
    fn continuity_at_kinks() {
        for &k in &[0.1, 0.33, 0.5, 0.9] {
            let p = params(k);
            let eps = 1e-12;
            for &x0 in &[-k, k] {
                assert!((p.hprime(x0 - eps) - p.hprime(x0 + eps)).abs() < 1e-9);
                assert!((p.hpotential(x0 - eps) - p.hpotential(x0 + eps)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn theta_has_zero_mean_on_midpoints() {
        let p = ModelParams::new(0.5, 3.0, 0.1).unwrap();
        let grid = midpoints(2000);
        let mean: f64 = grid.iter().map(|&q| p.theta(q).unwrap()).sum::<f64>() / 2000.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn energy_of_uniform_plus_well() {
        let p = ModelParams::new(0.5, 1.7, 0.1).unwrap();
        let grid = midpoints(2000);
        let x = vec![1.0; grid.len()];
        let r = energy_report(&p, &grid, &x, 0.0, 0.0);
        // mean of theta is zero, so only H(1) = 0 contributes
        assert!(r.energy.abs() < 1e-12);
        let exact = 1.7f64.powi(2) / 12.0;
        // midpoint rule error for a quadratic: delta^2 / (12 N^2)
        assert!((r.dissipation - exact).abs() < 1.7f64.powi(2) / (12.0 * 2000.0f64.powi(2)) * 1.01);
    }

    #[test]
    fn equilibrium_of_left_branch_dissipates_nothing() {
        let p = ModelParams::new(0.5, 0.4, 0.1).unwrap();
        let grid = midpoints(500);
        let sigma = -0.3;
        let x: Vec<f64> = grid.iter().map(|&q| p.theta(q).unwrap() + sigma - 1.0).collect();
        assert!(x.iter().all(|&v| p.classify(v) == Phase::Minus));
        let r = energy_report(&p, &grid, &x, sigma, 0.0);
        assert!(r.dissipation < 1e-28);
    }

    #[test]
    fn spinodal_center_energy() {
        // delta must be positive for a valid parameter set, but theta multiplies x = 0
        let p = ModelParams::new(0.5, 1e-300, 0.1).unwrap();
        let grid = midpoints(100);
        let x = vec![0.0; 100];
        let r = energy_report(&p, &grid, &x, 0.0, 0.0);
        assert!((r.energy - 0.25).abs() < 1e-15);
        assert!(r.dissipation < 1e-28);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn potential_derivative_matches_hprime(kappa in 0.05f64..0.95, x in -3.0f64..3.0) {
            let p = params(kappa);
            prop_assume!((x.abs() - kappa).abs() > 1e-3);
            let h = 1e-6;
            let fd = (p.hpotential(x + h) - p.hpotential(x - h)) / (2.0 * h);
            prop_assert!((fd - p.hprime(x)).abs() < 1e-6);
        }

    }

    proptest! {
        #[test]
        fn dissipation_is_nonnegative(
            kappa in 0.05f64..0.95,
            sigma in -2.0f64..2.0,
            xs in proptest::collection::vec(-3.0f64..3.0, 1..64),
        ) {
            let p = params(kappa);
            let n = xs.len();
            let grid = midpoints(n);
            prop_assert!(energy_report(&p, &grid, &xs, sigma, 0.3).dissipation >= 0.0);
        }
    }
}
