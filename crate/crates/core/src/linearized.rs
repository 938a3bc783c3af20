//! Linearized dynamics around a traveling wave on the particle grid.

use crate::particle::midpoint_grid;
use crate::wave::TravelingWave;

/// `tau z' = -z + psi z / kappa - mean(psi z) / kappa`, where `psi` indicates
/// the moving spinodal stripe `Xi_- < p - omega t < Xi_+`.
#[derive(Debug, Clone)]
pub struct LinearizedProblem {
    kappa: f64,
    tau: f64,
    omega: f64,
    xi_lo: f64,
    xi_hi: f64,
    pgrid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassTrace {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub z: Vec<f64>,
}

impl LinearizedProblem {
    pub fn new(wave: &TravelingWave, n: usize) -> Self {
        Self {
            kappa: wave.params.kappa(),
            tau: wave.params.tau(),
            omega: wave.omega,
            xi_lo: wave.xi_lo,
            xi_hi: wave.xi_hi,
            pgrid: midpoint_grid(n),
        }
    }

    pub fn pgrid(&self) -> &[f64] {
        &self.pgrid
    }

    pub fn psi(&self, t: f64, p: f64) -> f64 {
        let q = p - self.omega * t;
        if q > self.xi_lo && q < self.xi_hi {
            1.0
        } else {
            0.0
        }
    }

    /// Writes `dz/dt` into `out`.
    pub fn rhs(&self, t: f64, z: &[f64], out: &mut [f64]) {
        let n = z.len() as f64;
        let inv_k = 1.0 / self.kappa;
        let mut coupling = 0.0;
        for (o, (&zk, &p)) in out.iter_mut().zip(z.iter().zip(&self.pgrid)) {
            let pz = self.psi(t, p) * zk;
            coupling += pz;
            *o = -zk + inv_k * pz;
        }
        let c = inv_k * coupling / n;
        for o in out.iter_mut() {
            *o = (*o - c) / self.tau;
        }
    }

    /// Classical fourth-order Runge-Kutta from `z0` to `t_end`, recording the
    /// grid mean after every step.
    pub fn integrate(&self, z0: &[f64], dt: f64, t_end: f64) -> MassTrace {
        let n = z0.len();
        assert_eq!(n, self.pgrid.len(), "initial data must match the grid");
        let mut z = z0.to_vec();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mut trace = MassTrace {
            t: vec![0.0],
            mass: vec![mean(&z)],
            z: Vec::new(),
        };
        let steps = (t_end / dt).ceil().max(0.0) as usize;
        let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };
        for s in 0..steps {
            let t = s as f64 * h;
            self.rhs(t, &z, &mut k1);
            axpy(&z, 0.5 * h, &k1, &mut tmp);
            self.rhs(t + 0.5 * h, &tmp, &mut k2);
            axpy(&z, 0.5 * h, &k2, &mut tmp);
            self.rhs(t + 0.5 * h, &tmp, &mut k3);
            axpy(&z, h, &k3, &mut tmp);
            self.rhs(t + h, &tmp, &mut k4);
            for i in 0..n {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            trace.t.push(t + h);
            trace.mass.push(mean(&z));
        }
        trace.z = z;
        trace
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}
