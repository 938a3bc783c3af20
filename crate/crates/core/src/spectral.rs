//! Spectrum of the linearization around a traveling wave.
//!
//! Most functions work in the scaled eigenvalue `z = tau * lambda` and use
//! `a = kappa z + kappa`, `b = a - 1` and `s = kappa tau |omega|`. The point
//! spectrum consists of zeros of
//!
//! * `exp(2 b W / s) - 1 - a b (b + 2 W) / s` for `Re z < -1`,
//! * `1 - exp(-2 b W / s) - a b (b + 2 W) / s` for `Re z > -1`, `b != 0`,
//!
//! and the line `Re z = -1` is continuous spectrum.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelParams;
use crate::quad::integrate_complex;
use crate::wave::{solve_width, WaveError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("wave speed must be nonzero and finite, got {0}")]
    ZeroSpeed(f64),
    #[error("half width must be positive and finite, got {0}")]
    Width(f64),
    #[error("rescaled equation needs a wave-consistent width")]
    NotCoupled,
    #[error("tau*lambda = (1-kappa)/kappa does not belong to the spectrum")]
    ExcludedPoint,
    #[error("kappa*tau*lambda + kappa is numerically {0} outside the handled special cases")]
    DegenerateDenominator(f64),
    #[error("search window is too coarse: {converged} converging seeds for {roots} roots")]
    WindowTooCoarse { converged: usize, roots: usize },
    #[error("invalid search window: {0}")]
    InvalidWindow(String),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralProblem {
    pub params: ModelParams,
    pub omega: f64,
    /// Half interface width `W`.
    pub w: f64,
    /// Whether `2 W` solves the width equation for `omega`.
    pub coupled: bool,
}

/// Sign in front of `2 W` in the cubic factor of the `S_+` equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthSign {
    Plus,
    Minus,
}

impl WidthSign {
    fn factor(self) -> f64 {
        match self {
            WidthSign::Plus => 1.0,
            WidthSign::Minus => -1.0,
        }
    }
}

impl SpectralProblem {
    pub fn coupled(params: &ModelParams, omega: f64) -> Result<Self, SpectralError> {
        check_speed(omega)?;
        let w = 0.5 * solve_width(params, omega)?;
        Ok(Self {
            params: *params,
            omega,
            w,
            coupled: true,
        })
    }

    pub fn free(params: &ModelParams, omega: f64, w: f64) -> Result<Self, SpectralError> {
        check_speed(omega)?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(SpectralError::Width(w));
        }
        Ok(Self {
            params: *params,
            omega,
            w,
            coupled: false,
        })
    }

    pub fn s(&self) -> f64 {
        self.params.kappa() * self.params.tau() * self.omega.abs()
    }

    /// `epsilon = tau |omega| / (2 W)`.
    pub fn epsilon(&self) -> f64 {
        self.params.tau() * self.omega.abs() / (2.0 * self.w)
    }

    /// The scaled eigenvalue `(1 - kappa) / kappa` where the `S_+` equation
    /// has a spurious zero.
    pub fn excluded_tau_lambda(&self) -> f64 {
        self.params.spinodal_slope()
    }

    fn ab(&self, z: Complex64) -> (Complex64, Complex64) {
        let a = self.params.kappa() * (z + 1.0);
        (a, a - 1.0)
    }

    fn cubic(&self, z: Complex64, sign: f64) -> (Complex64, Complex64) {
        let k = self.params.kappa();
        let (a, b) = self.ab(z);
        let c = b + sign * 2.0 * self.w;
        let s = self.s();
        (a * b * c / s, k * (b * c + a * c + a * b) / s)
    }

    /// `S_-` characteristic function and its derivative in `z = tau lambda`.
    pub fn char_minus_z(&self, z: Complex64) -> (Complex64, Complex64) {
        let (_, b) = self.ab(z);
        let r = 2.0 * self.w / self.s();
        let e = (b * r).exp();
        let (p, dp) = self.cubic(z, 1.0);
        (e - 1.0 - p, e * (self.params.kappa() * r) - dp)
    }

    /// `S_+` characteristic function with the chosen sign of `2 W`, and its
    /// derivative in `z`.
    pub fn char_plus_signed_z(&self, z: Complex64, sign: WidthSign) -> (Complex64, Complex64) {
        let (_, b) = self.ab(z);
        let r = 2.0 * self.w / self.s();
        let e = (-b * r).exp();
        let (p, dp) = self.cubic(z, sign.factor());
        (ONE - e - p, e * (self.params.kappa() * r) - dp)
    }

    pub fn char_plus_z(&self, z: Complex64) -> (Complex64, Complex64) {
        self.char_plus_signed_z(z, WidthSign::Plus)
    }

    pub fn char_minus(&self, lambda: Complex64) -> Complex64 {
        self.char_minus_z(lambda * self.params.tau()).0
    }

    pub fn char_plus(&self, lambda: Complex64) -> Complex64 {
        self.char_plus_z(lambda * self.params.tau()).0
    }
}

fn check_speed(omega: f64) -> Result<(), SpectralError> {
    if omega == 0.0 || !omega.is_finite() {
        Err(SpectralError::ZeroSpeed(omega))
    } else {
        Ok(())
    }
}

pub fn char_minus(problem: &SpectralProblem, lambda: Complex64) -> Complex64 {
    problem.char_minus(lambda)
}

pub fn char_plus(problem: &SpectralProblem, lambda: Complex64) -> Complex64 {
    problem.char_plus(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralClass {
    SMinus,
    SZero,
    SPlus,
}

impl SpectralClass {
    pub fn of(tau_lambda: Complex64) -> Self {
        if tau_lambda.re < -1.0 {
            SpectralClass::SMinus
        } else if tau_lambda.re > -1.0 {
            SpectralClass::SPlus
        } else {
            SpectralClass::SZero
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: Complex64,
    pub tau_lambda: Complex64,
    pub class: SpectralClass,
    /// Modulus of the characteristic function at the root.
    pub residual: f64,
    pub excluded: bool,
}

impl SpectralPoint {
    pub fn from_tau_lambda(problem: &SpectralProblem, z: Complex64) -> Self {
        let class = SpectralClass::of(z);
        let residual = match class {
            SpectralClass::SMinus => problem.char_minus_z(z).0.norm(),
            SpectralClass::SPlus => problem.char_plus_z(z).0.norm(),
            SpectralClass::SZero => 0.0,
        };
        let zx = problem.excluded_tau_lambda();
        Self {
            lambda: z / problem.params.tau(),
            tau_lambda: z,
            class,
            residual,
            excluded: (z - zx).norm() <= exclusion_radius(zx),
        }
    }

    pub fn is_unstable(&self) -> bool {
        self.lambda.re > 0.0
    }
}

fn exclusion_radius(zx: f64) -> f64 {
    1e-4 * zx.abs().max(1.0)
}

/// Rectangle in the `tau lambda` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    /// `Re in [-1 + 1e-6, 4]`, `|Im| <= 10 pi epsilon`.
    pub fn default_for(problem: &SpectralProblem) -> Self {
        let r = 10.0 * problem.epsilon() * std::f64::consts::PI;
        Self {
            re_min: -1.0 + 1e-6,
            re_max: 4.0,
            im_min: -r,
            im_max: r,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn validate(&self) -> Result<(), SpectralError> {
        let ok = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite())
            && self.re_max > self.re_min
            && self.im_max > self.im_min;
        if ok {
            Ok(())
        } else {
            Err(SpectralError::InvalidWindow(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub nx: usize,
    pub ny: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub dedup: f64,
    /// Minimum mean number of converging seeds per distinct root.
    pub min_seeds_per_root: f64,
    pub sign: WidthSign,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            nx: 80,
            ny: 80,
            max_iter: 50,
            tol: 1e-10,
            dedup: 1e-8,
            min_seeds_per_root: 4.0,
            sign: WidthSign::Plus,
        }
    }
}

impl SearchOptions {
    pub fn with_density(mut self, nx: usize, ny: usize) -> Self {
        self.nx = nx;
        self.ny = ny;
        self
    }

    pub fn with_sign(mut self, sign: WidthSign) -> Self {
        self.sign = sign;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub roots: Vec<SpectralPoint>,
    /// Converged seeds that landed on the excluded point.
    pub excluded_hits: usize,
    pub excluded_tau_lambda: f64,
    pub continuous_re_lambda: f64,
    pub epsilon: f64,
    /// `ln(2 / delta)`, the limit of the rescaled real parts.
    pub asymptotic_real_part: f64,
    pub converged_seeds: usize,
    /// Index pairs of distinct roots closer than `1e-6`.
    pub clusters: Vec<(usize, usize)>,
    pub window: Window,
}

impl SpectrumReport {
    pub fn unstable(&self) -> impl Iterator<Item = &SpectralPoint> {
        self.roots.iter().filter(|r| r.is_unstable())
    }
}

fn newton<F: Fn(Complex64) -> (Complex64, Complex64)>(
    f: &F,
    mut z: Complex64,
    max_iter: usize,
    tol: f64,
) -> Option<Complex64> {
    for _ in 0..max_iter {
        let (v, dv) = f(z);
        if !v.is_finite() || !dv.is_finite() || dv.norm() == 0.0 {
            return None;
        }
        let step = v / dv;
        z -= step;
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    let (v, _) = f(z);
    (v.is_finite() && v.norm() <= tol).then_some(z)
}

/// All zeros of the characteristic functions inside `window`, found by Newton
/// iteration from a rectangular seed grid.
pub fn find_spectrum(
    problem: &SpectralProblem,
    window: &Window,
    opts: &SearchOptions,
) -> Result<SpectrumReport, SpectralError> {
    window.validate()?;
    let (nx, ny) = (opts.nx.max(1), opts.ny.max(1));
    let seeds: Vec<Complex64> = (0..ny)
        .flat_map(|j| {
            (0..nx).map(move |i| {
                Complex64::new(
                    window.re_min + (i as f64 + 0.5) / nx as f64 * (window.re_max - window.re_min),
                    window.im_min + (j as f64 + 0.5) / ny as f64 * (window.im_max - window.im_min),
                )
            })
        })
        .collect();
    let sign = opts.sign;
    let hits: Vec<Option<Complex64>> = seeds
        .par_iter()
        .map(|&z0| {
            let root = if z0.re < -1.0 {
                newton(&|z| problem.char_minus_z(z), z0, opts.max_iter, opts.tol).filter(|z| z.re < -1.0)
            } else {
                newton(&|z| problem.char_plus_signed_z(z, sign), z0, opts.max_iter, opts.tol).filter(|z| z.re > -1.0)
            };
            root.filter(|z| window.contains(*z))
        })
        .collect();

    let zx = problem.excluded_tau_lambda();
    let mut excluded_hits = 0;
    let mut found: Vec<Complex64> = Vec::new();
    for z in hits.iter().flatten() {
        if (z - zx).norm() <= exclusion_radius(zx) {
            excluded_hits += 1;
        } else {
            found.push(*z);
        }
    }
    let converged = found.len();
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut unique: Vec<Complex64> = Vec::new();
    for z in found {
        if !unique
            .iter()
            .any(|u| (u - z).norm() <= opts.dedup * u.norm().max(1.0))
        {
            unique.push(z);
        }
    }
    if !unique.is_empty() && (converged as f64) < opts.min_seeds_per_root * unique.len() as f64 {
        return Err(SpectralError::WindowTooCoarse {
            converged,
            roots: unique.len(),
        });
    }
    unique.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let roots: Vec<SpectralPoint> = unique
        .iter()
        .map(|&z| {
            let mut pt = SpectralPoint::from_tau_lambda(problem, z);
            if sign == WidthSign::Minus && pt.class == SpectralClass::SPlus {
                pt.residual = problem.char_plus_signed_z(z, sign).0.norm();
            }
            pt
        })
        .collect();
    let mut clusters = Vec::new();
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            let (a, b) = (roots[i].tau_lambda, roots[j].tau_lambda);
            if (a - b).norm() < 1e-6 * a.norm().max(1.0) {
                clusters.push((i, j));
            }
        }
    }
    Ok(SpectrumReport {
        roots,
        excluded_hits,
        excluded_tau_lambda: zx,
        continuous_re_lambda: -1.0 / problem.params.tau(),
        epsilon: problem.epsilon(),
        asymptotic_real_part: (2.0 / problem.params.delta()).ln(),
        converged_seeds: converged,
        clusters,
        window: *window,
    })
}

/// Values of the characteristic function on a grid, using `char_minus` left of
/// `Re z = -1` and `char_plus` elsewhere. Rows are `(Re z, Im z, value)`.
pub fn char_grid(problem: &SpectralProblem, window: &Window, nx: usize, ny: usize) -> Vec<(f64, f64, Complex64)> {
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let re = window.re_min + i as f64 / (nx.max(2) - 1) as f64 * (window.re_max - window.re_min);
            let im = window.im_min + j as f64 / (ny.max(2) - 1) as f64 * (window.im_max - window.im_min);
            let z = Complex64::new(re, im);
            let v = if re < -1.0 {
                problem.char_minus_z(z).0
            } else {
                problem.char_plus_z(z).0
            };
            out.push((re, im, v));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EigenShape {
    /// Exponential pieces `-zeta/a + zeta C e^{aP/s}` outside and
    /// `-zeta/b + zeta C_0 e^{bP/s}` inside.
    Exponential,
    /// `tau lambda = -1`: linear outer pieces `zeta P / s + zeta D`.
    LinearGrowth { d_minus: Complex64, d_plus: Complex64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenfunction {
    pub tau_lambda: Complex64,
    pub zeta: Complex64,
    pub c_minus: Complex64,
    pub c_zero: Complex64,
    pub c_plus: Complex64,
    pub shape: EigenShape,
    /// Constants are stated for `|omega|`; for `omega < 0` evaluation uses
    /// `Z(P) = Y(-P)`.
    pub reflected: bool,
    w: f64,
    s: f64,
    kappa: f64,
}

impl Eigenfunction {
    /// The trivial function `Z = 0` with `zeta = 0`.
    pub fn zero(problem: &SpectralProblem, tau_lambda: Complex64) -> Self {
        let z0 = Complex64::new(0.0, 0.0);
        Self {
            tau_lambda,
            zeta: z0,
            c_minus: z0,
            c_zero: z0,
            c_plus: z0,
            shape: EigenShape::Exponential,
            reflected: problem.omega < 0.0,
            w: problem.w,
            s: problem.s(),
            kappa: problem.params.kappa(),
        }
    }

    /// Value and derivative in the `|omega|` frame.
    fn eval_positive(&self, p: f64) -> (Complex64, Complex64) {
        let a = self.kappa * (self.tau_lambda + 1.0);
        let b = a - 1.0;
        let s = self.s;
        let zeta = self.zeta;
        let inner = |c: Complex64| {
            let e = (b * p / s).exp();
            (zeta * (-1.0 / b + c * e), zeta * c * b / s * e)
        };
        if p > -self.w && p < self.w {
            return inner(self.c_zero);
        }
        match self.shape {
            EigenShape::Exponential => {
                let c = if p <= -self.w { self.c_minus } else { self.c_plus };
                if c.norm() == 0.0 {
                    return (-zeta / a, Complex64::new(0.0, 0.0));
                }
                let e = (a * p / s).exp();
                (zeta * (-1.0 / a + c * e), zeta * c * a / s * e)
            }
            EigenShape::LinearGrowth { d_minus, d_plus } => {
                let d = if p <= -self.w { d_minus } else { d_plus };
                (zeta * (p / s + d), zeta / s)
            }
        }
    }

    /// `(Z(P), Z'(P))` in the frame of the original wave speed.
    pub fn eval(&self, p: f64) -> (Complex64, Complex64) {
        if self.zeta.norm() == 0.0 {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        if self.reflected {
            let (v, dv) = self.eval_positive(-p);
            (v, -dv)
        } else {
            self.eval_positive(p)
        }
    }

    /// One-sided value of `Z` at `p` approached from the inside (`inner = true`)
    /// or the outside of the spinodal stripe.
    fn one_sided(&self, p: f64, inner: bool) -> Complex64 {
        if self.zeta.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let q = if self.reflected { -p } else { p };
        let a = self.kappa * (self.tau_lambda + 1.0);
        let b = a - 1.0;
        if inner {
            return self.zeta * (-1.0 / b + self.c_zero * (b * q / self.s).exp());
        }
        match self.shape {
            EigenShape::Exponential => {
                let c = if q < 0.0 { self.c_minus } else { self.c_plus };
                self.zeta * (-1.0 / a + c * (a * q / self.s).exp())
            }
            EigenShape::LinearGrowth { d_minus, d_plus } => {
                let d = if q < 0.0 { d_minus } else { d_plus };
                self.zeta * (q / self.s + d)
            }
        }
    }
}

/// Matching-based constants for a given `C_0`, in the `|omega|` frame.
fn outer_constants(a: Complex64, b: Complex64, w: f64, s: f64, c0: Complex64) -> (Complex64, Complex64) {
    let base = 1.0 / a - 1.0 / b;
    let cm = (a * w / s).exp() * (base + c0 * (-b * w / s).exp());
    let cp = (-a * w / s).exp() * (base + c0 * (b * w / s).exp());
    (cm, cp)
}

/// Eigenfunction with `zeta = 1` for a point of `S_-`, `S_0` or `S_+`.
pub fn build_eigenfunction(problem: &SpectralProblem, point: &SpectralPoint) -> Result<Eigenfunction, SpectralError> {
    let z = point.tau_lambda;
    let k = problem.params.kappa();
    let (w, s) = (problem.w, problem.s());
    let a = k * (z + 1.0);
    let b = a - 1.0;
    let mut ef = Eigenfunction::zero(problem, z);
    ef.zeta = ONE;
    if b.norm() <= 1e-12 {
        return Err(SpectralError::ExcludedPoint);
    }
    if a.norm() <= 1e-14 {
        let e = (w / s).exp();
        let c0 = Complex64::from((2.0 * w - 1.0) / s / (1.0 / e - e));
        ef.c_zero = c0;
        ef.shape = EigenShape::LinearGrowth {
            d_minus: ONE + w / s + c0 * e,
            d_plus: ONE - w / s + c0 / e,
        };
        return Ok(ef);
    }
    if a.norm() < 1e-8 {
        return Err(SpectralError::DegenerateDenominator(a.norm()));
    }
    if b.norm() < 1e-8 {
        return Err(SpectralError::DegenerateDenominator(a.norm()));
    }
    let ab = a * b;
    match point.class {
        SpectralClass::SPlus => {
            let c0 = (-b * w / s).exp() / ab;
            let (cm, _) = outer_constants(a, b, w, s, c0);
            ef.c_zero = c0;
            ef.c_minus = cm;
        }
        SpectralClass::SMinus => {
            let c0 = (b * w / s).exp() / ab;
            let (_, cp) = outer_constants(a, b, w, s, c0);
            ef.c_zero = c0;
            ef.c_plus = cp;
        }
        SpectralClass::SZero => {
            let c0 = ((b + 2.0 * w) / s) / ((b * w / s).exp() - (-b * w / s).exp());
            let (cm, cp) = outer_constants(a, b, w, s, c0);
            ef.c_zero = c0;
            ef.c_minus = cm;
            ef.c_plus = cp;
        }
    }
    Ok(ef)
}

/// Numerical `int_{-W}^{W} Z`.
pub fn mean_field(problem: &SpectralProblem, ef: &Eigenfunction) -> Complex64 {
    let w = problem.w;
    let scale = ef.eval(-w * (1.0 - 1e-12)).0.norm().max(ef.eval(w * (1.0 - 1e-12)).0.norm()).max(1.0);
    integrate_complex(|p| ef.eval(p).0, -w, w, 1e-14 * scale * w, &[]).value
}

/// Maximum over sampled `P` of `|tau lambda Z - tau omega Z' + Z - Psi Z / kappa + zeta / kappa|`,
/// with `zeta` recomputed by quadrature, together with the matching jumps at
/// `P = -W` and `P = +W`.
pub fn ep_residual(problem: &SpectralProblem, point: &SpectralPoint, ef: &Eigenfunction) -> f64 {
    let (tau, omega, k, w) = (problem.params.tau(), problem.omega, problem.params.kappa(), problem.w);
    let zl = point.tau_lambda;
    let zeta = mean_field(problem, ef);
    let reach = 20.0 * w.max(problem.s() / k);
    let eq = |p: f64, inside: bool| {
        let (v, dv) = ef.eval(p);
        let psi = if inside { 1.0 } else { 0.0 };
        (zl * v - tau * omega * dv + v - psi / k * v + zeta / k).norm()
    };
    let mut worst = 0.0f64;
    let samples = 400;
    for i in 0..samples {
        let f = (i as f64 + 0.5) / samples as f64;
        worst = worst.max(eq(-w - reach * f, false));
        worst = worst.max(eq(w + reach * f, false));
        worst = worst.max(eq(-w + 2.0 * w * f, true));
    }
    for p in [-w, w] {
        worst = worst.max((ef.one_sided(p, true) - ef.one_sided(p, false)).norm());
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledRoot {
    pub mu: Complex64,
    pub epsilon: f64,
}

impl RescaledRoot {
    pub fn from_lambda(problem: &SpectralProblem, lambda: Complex64) -> Self {
        let epsilon = problem.epsilon();
        Self {
            mu: lambda * problem.params.tau() / epsilon,
            epsilon,
        }
    }

    pub fn to_lambda(&self, tau: f64) -> Complex64 {
        self.mu * self.epsilon / tau
    }
}

/// Right-hand side `R(mu)` of the rescaled `S_+` equation `exp(mu) = R(mu)`.
pub fn rescaled_rhs(problem: &SpectralProblem, mu: Complex64) -> Result<Complex64, SpectralError> {
    if !problem.coupled {
        return Err(SpectralError::NotCoupled);
    }
    let (k, d) = (problem.params.kappa(), problem.params.delta());
    let tw = problem.params.tau() * problem.omega.abs();
    let eps = problem.epsilon();
    let a = k * eps * mu + k;
    let b = a - 1.0;
    let num = 2.0 * (1.0 - k).powi(2) + (1.0 - k) * d * 2.0 * problem.w + tw * d;
    Ok(-(k / d) * num / (a * b * (b + 2.0 * problem.w) - k * tw))
}

pub fn rescaled_char(problem: &SpectralProblem, mu: Complex64) -> Result<Complex64, SpectralError> {
    Ok(mu.exp() - rescaled_rhs(problem, mu)?)
}

/// Roots of the `tau -> 0` limit equation `exp(mu) = -2 / delta`.
pub fn limiting_roots(delta: f64, rungs: i64) -> Vec<Complex64> {
    let re = (2.0 / delta).ln();
    (-rungs..rungs)
        .map(|k| Complex64::new(re, std::f64::consts::PI * (2 * k + 1) as f64))
        .collect()
}

/// `S_+` roots with `|mu| <= 2 pi`.
pub fn near_origin(problem: &SpectralProblem, report: &SpectrumReport) -> Vec<RescaledRoot> {
    report
        .roots
        .iter()
        .filter(|r| r.class == SpectralClass::SPlus)
        .map(|r| RescaledRoot::from_lambda(problem, r.lambda))
        .filter(|r| r.mu.norm() <= 2.0 * std::f64::consts::PI)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Unstable {
        max_re_lambda: f64,
    },
    Stable {
        max_re_lambda: Option<f64>,
    },
    /// Largest real part within `1e-9` of zero in `tau lambda` units.
    Marginal {
        max_re_lambda: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    /// `ln(2 / delta)`; positive means unstable as `tau -> 0`.
    pub asymptotic_real_part: f64,
    pub asymptotically_unstable: bool,
    pub max_re_mu_near_origin: Option<f64>,
}

pub fn instability_verdict(params: &ModelParams, omega: f64) -> Result<StabilityReport, SpectralError> {
    let problem = SpectralProblem::coupled(params, omega)?;
    let window = Window::default_for(&problem);
    let report = find_spectrum(&problem, &window, &SearchOptions::default())?;
    Ok(verdict_from(&problem, &report))
}

pub fn verdict_from(problem: &SpectralProblem, report: &SpectrumReport) -> StabilityReport {
    let tau = problem.params.tau();
    let max_re = report
        .roots
        .iter()
        .filter(|r| r.class == SpectralClass::SPlus)
        .map(|r| r.tau_lambda.re)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let verdict = match max_re {
        Some(v) if v.abs() <= 1e-9 => Verdict::Marginal { max_re_lambda: v / tau },
        Some(v) if v > 0.0 => Verdict::Unstable { max_re_lambda: v / tau },
        other => Verdict::Stable {
            max_re_lambda: other.map(|v| v / tau),
        },
    };
    let asym = report.asymptotic_real_part;
    StabilityReport {
        verdict,
        asymptotic_real_part: asym,
        asymptotically_unstable: asym > 0.0,
        max_re_mu_near_origin: near_origin(problem, report)
            .iter()
            .map(|r| r.mu.re)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignDecision {
    pub chosen: WidthSign,
    pub plus_roots: usize,
    pub minus_roots: usize,
    /// Largest eigenpair residual among roots of the `+2W` equation.
    pub plus_max_residual: f64,
    /// Number of `-2W` roots whose eigenpair residual exceeds `1e-3`.
    pub minus_rejected: usize,
    pub minus_min_residual: f64,
}

/// Decides the sign of `2 W` in the `S_+` equation by building eigenfunctions
/// for the roots of both variants and checking them against the eigenvalue
/// problem.
pub fn resolve_width_sign(problem: &SpectralProblem, window: &Window) -> Result<SignDecision, SpectralError> {
    let residuals = |sign: WidthSign| -> Result<Vec<f64>, SpectralError> {
        let mut opts = SearchOptions::default().with_sign(sign);
        opts.min_seeds_per_root = 0.0;
        let report = find_spectrum(problem, window, &opts)?;
        report
            .roots
            .iter()
            .filter(|r| r.class == SpectralClass::SPlus)
            .map(|r| Ok(ep_residual(problem, r, &build_eigenfunction(problem, r)?)))
            .collect()
    };
    let plus = residuals(WidthSign::Plus)?;
    let minus = residuals(WidthSign::Minus)?;
    let max_of = |v: &[f64]| v.iter().copied().fold(0.0f64, f64::max);
    let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let (pmax, mmax) = (max_of(&plus), max_of(&minus));
    let chosen = if pmax <= mmax { WidthSign::Plus } else { WidthSign::Minus };
    Ok(SignDecision {
        chosen,
        plus_roots: plus.len(),
        minus_roots: minus.len(),
        plus_max_residual: pmax,
        minus_rejected: minus.iter().filter(|&&r| r > 1e-3).count(),
        minus_min_residual: min_of(&minus),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(tau: f64, delta: f64) -> SpectralProblem {
        SpectralProblem::coupled(&ModelParams::new(0.5, delta, tau).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pr = problem(0.05, 1.0);
        let z = Complex64::new(0.3, 0.7);
        let h = 1e-6;
        for f in [
            &(|z| pr.char_plus_z(z)) as &dyn Fn(Complex64) -> (Complex64, Complex64),
            &|z| pr.char_minus_z(z),
        ] {
            let fd = (f(z + h).0 - f(z - h).0) / (2.0 * h);
            assert!((fd - f(z).1).norm() < 1e-6 * f(z).1.norm().max(1.0));
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let pr = problem(0.02, 1.0);
        let l = Complex64::new(3.0, -11.0);
        assert!((pr.char_plus(l.conj()) - pr.char_plus(l).conj()).norm() < 1e-12);
        assert!((pr.char_minus(l.conj()) - pr.char_minus(l).conj()).norm() < 1e-12);
    }

    #[test]
    fn excluded_point_is_a_zero() {
        let pr = problem(0.1, 1.0);
        let zx = Complex64::from(pr.excluded_tau_lambda());
        assert!(pr.char_plus_z(zx).0.norm() < 1e-12);
        let pt = SpectralPoint::from_tau_lambda(&pr, zx);
        assert!(pt.excluded);
        assert_eq!(build_eigenfunction(&pr, &pt), Err(SpectralError::ExcludedPoint));
        let zero = Eigenfunction::zero(&pr, zx);
        assert_eq!(ep_residual(&pr, &pt, &zero), 0.0);
    }

    #[test]
    fn linear_growth_eigenfunction() {
        let pr = problem(0.1, 1.0);
        let pt = SpectralPoint::from_tau_lambda(&pr, Complex64::from(-1.0));
        let ef = build_eigenfunction(&pr, &pt).unwrap();
        assert!(matches!(ef.shape, EigenShape::LinearGrowth { .. }));
        assert!(ep_residual(&pr, &pt, &ef) < 1e-8);
        let slope = (ef.eval(-10.0).0 - ef.eval(-11.0).0).norm();
        assert!((slope - 1.0 / pr.s()).abs() < 1e-6 / pr.s());
        assert!((mean_field(&pr, &ef) - ONE).norm() < 1e-8);
    }

    #[test]
    fn continuous_spectrum_eigenfunctions() {
        for omega in [1.0, -1.0] {
            let pr = SpectralProblem::coupled(&ModelParams::new(0.4, 1.0, 0.05).unwrap(), omega).unwrap();
            for nu in [0.3, -2.0, 7.5] {
                let z = Complex64::new(-1.0, nu);
                let pt = SpectralPoint::from_tau_lambda(&pr, z);
                assert_eq!(pt.class, SpectralClass::SZero);
                let ef = build_eigenfunction(&pr, &pt).unwrap();
                assert!(ep_residual(&pr, &pt, &ef) < 1e-8);
            }
        }
    }

    #[test]
    fn one_real_root_in_s_minus() {
        let pr = problem(0.1, 1.0);
        let window = Window {
            re_min: -8.0,
            re_max: -1.0 - 1e-6,
            im_min: -0.5,
            im_max: 0.5,
        };
        let mut opts = SearchOptions::default();
        opts.min_seeds_per_root = 0.0;
        let rep = find_spectrum(&pr, &window, &opts).unwrap();
        let real: Vec<_> = rep.roots.iter().filter(|r| r.tau_lambda.im.abs() < 1e-9).collect();
        assert_eq!(real.len(), 1);
        // independent bracket on the real axis
        let f = |x: f64| pr.char_minus_z(Complex64::from(x)).0.re;
        let xs: Vec<f64> = (0..=7000).map(|i| -8.0 + i as f64 * 1e-3 * (7.0 - 1e-6) / 7.0).collect();
        let changes = xs.windows(2).filter(|w| f(w[0]).signum() != f(w[1]).signum()).count();
        assert_eq!(changes, 1);
        let ef = build_eigenfunction(&pr, real[0]).unwrap();
        assert!(ep_residual(&pr, real[0], &ef) < 1e-8);
    }

    #[test]
    fn rescaled_limit() {
        let pr = problem(1e-3, 1.0);
        let r = rescaled_rhs(&pr, Complex64::new(0.0, 0.0)).unwrap();
        assert!((r + 2.0).norm() < 0.5);
        let free = SpectralProblem::free(&ModelParams::new(0.5, 1.0, 1e-3).unwrap(), 1.0, 0.01).unwrap();
        assert_eq!(rescaled_rhs(&free, ONE), Err(SpectralError::NotCoupled));
        for mu in limiting_roots(1.0, 3) {
            assert!((mu.exp() + 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn rescaled_roots_match_char_plus_roots() {
        let pr = problem(1e-3, 1.0);
        let rep = find_spectrum(&pr, &Window::default_for(&pr), &SearchOptions::default()).unwrap();
        assert!(!rep.roots.is_empty());
        for r in &rep.roots {
            let m = RescaledRoot::from_lambda(&pr, r.lambda);
            let back = m.to_lambda(pr.params.tau());
            assert!((back - r.lambda).norm() <= 1e-14 * r.lambda.norm().max(1.0));
            let v = rescaled_char(&pr, m.mu).unwrap();
            assert!(v.norm() < 1e-6 * m.mu.exp().norm().max(1.0), "{v}");
        }
    }
}
