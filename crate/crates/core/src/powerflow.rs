//! Polar Newton–Raphson power flow on a constant-admittance network.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusKind {
    Slack { v: f64, theta: f64 },
    PV { p: f64, v: f64 },
    /// Net injection `p + jq`; zero for a passive bus.
    PQ { p: f64, q: f64 },
}

/// Converged bus voltages and net injections.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowResult {
    pub v: Vec<Complex64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub iterations: usize,
    pub mismatch: f64,
}

impl PowerFlowResult {
    pub fn magnitude(&self, k: usize) -> f64 {
        self.v[k].norm()
    }

    pub fn angle(&self, k: usize) -> f64 {
        self.v[k].arg()
    }

    /// Current injected into the network at bus `k`.
    pub fn current(&self, k: usize) -> Complex64 {
        (Complex64::new(self.p[k], self.q[k]) / self.v[k]).conj()
    }
}

fn injections(y: &DMatrix<Complex64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    let i = y * v;
    v.zip_map(&i, |vk, ik| vk * ik.conj())
}

/// Solves the power flow from a flat start.
pub fn solve_power_flow(y: &DMatrix<Complex64>, kinds: &[BusKind]) -> Result<PowerFlowResult> {
    let n = kinds.len();
    if y.nrows() != n || y.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "admittance is {}x{}, expected {n} buses",
            y.nrows(),
            y.ncols()
        )));
    }
    let slack: Vec<usize> = (0..n).filter(|&k| matches!(kinds[k], BusKind::Slack { .. })).collect();
    if slack.len() != 1 {
        return Err(Error::InvalidArgument(format!("power flow needs one slack bus, found {}", slack.len())));
    }

    let mut mag = vec![1.0; n];
    let mut ang = vec![0.0; n];
    for (k, kind) in kinds.iter().enumerate() {
        match *kind {
            BusKind::Slack { v, theta } => {
                mag[k] = v;
                ang[k] = theta;
            }
            BusKind::PV { v, .. } => mag[k] = v,
            BusKind::PQ { .. } => {}
        }
    }
    let theta_idx: Vec<usize> = (0..n).filter(|&k| !matches!(kinds[k], BusKind::Slack { .. })).collect();
    let mag_idx: Vec<usize> = (0..n).filter(|&k| matches!(kinds[k], BusKind::PQ { .. })).collect();
    let m = theta_idx.len() + mag_idx.len();

    let voltage = |mag: &[f64], ang: &[f64]| DVector::from_fn(n, |k, _| Complex64::from_polar(mag[k], ang[k]));
    let mismatch = |s: &DVector<Complex64>| {
        let mut f = DVector::zeros(m);
        for (r, &k) in theta_idx.iter().enumerate() {
            let p_set = match kinds[k] {
                BusKind::PV { p, .. } | BusKind::PQ { p, .. } => p,
                BusKind::Slack { .. } => unreachable!(),
            };
            f[r] = s[k].re - p_set;
        }
        for (r, &k) in mag_idx.iter().enumerate() {
            if let BusKind::PQ { q, .. } = kinds[k] {
                f[theta_idx.len() + r] = s[k].im - q;
            }
        }
        f
    };

    let mut iterations = 0;
    loop {
        let v = voltage(&mag, &ang);
        let s = injections(y, &v);
        let f = mismatch(&s);
        let norm = f.amax();
        if norm < TOLERANCE {
            let v: Vec<Complex64> = v.iter().copied().collect();
            return Ok(PowerFlowResult {
                p: s.iter().map(|z| z.re).collect(),
                q: s.iter().map(|z| z.im).collect(),
                v,
                iterations,
                mismatch: norm,
            });
        }
        if iterations == MAX_ITERATIONS || !norm.is_finite() {
            return Err(Error::PowerFlowDiverged {
                iterations,
                mismatch: norm,
            });
        }

        // dS/dθ = j diag(V) conj(diag(I) − Y diag(V))
        // dS/d|V| = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        let i = y * &v;
        let vn = v.map(|z| z / z.norm());
        let mut ds_dth = DMatrix::from_fn(n, n, |a, b| -y[(a, b)] * v[b]);
        let mut ds_dv = DMatrix::from_fn(n, n, |a, b| y[(a, b)] * vn[b]);
        for k in 0..n {
            ds_dth[(k, k)] += i[k];
        }
        for a in 0..n {
            for b in 0..n {
                ds_dth[(a, b)] = Complex64::i() * v[a] * ds_dth[(a, b)].conj();
                ds_dv[(a, b)] = v[a] * ds_dv[(a, b)].conj();
            }
            ds_dv[(a, a)] += i[a].conj() * vn[a];
        }

        let mut jac = DMatrix::zeros(m, m);
        let rows: Vec<(usize, bool)> = theta_idx
            .iter()
            .map(|&k| (k, true))
            .chain(mag_idx.iter().map(|&k| (k, false)))
            .collect();
        for (r, &(a, real)) in rows.iter().enumerate() {
            let pick = |z: Complex64| if real { z.re } else { z.im };
            for (cidx, &b) in theta_idx.iter().enumerate() {
                jac[(r, cidx)] = pick(ds_dth[(a, b)]);
            }
            for (cidx, &b) in mag_idx.iter().enumerate() {
                jac[(r, theta_idx.len() + cidx)] = pick(ds_dv[(a, b)]);
            }
        }
        let dx = jac.lu().solve(&f).ok_or(Error::Singular("power-flow Jacobian"))?;
        for (cidx, &k) in theta_idx.iter().enumerate() {
            ang[k] -= dx[cidx];
        }
        for (cidx, &k) in mag_idx.iter().enumerate() {
            mag[k] -= dx[theta_idx.len() + cidx];
        }
        iterations += 1;
    }
}

/// Complex power leaving `from` towards `to` through a series admittance
/// `y_series` with shunt `y_shunt` at the sending end.
pub fn branch_flow(v_from: Complex64, v_to: Complex64, y_series: Complex64, y_shunt: Complex64) -> Complex64 {
    let i = (v_from - v_to) * y_series + v_from * y_shunt;
    v_from * i.conj()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus(x: f64) -> DMatrix<Complex64> {
        let y = Complex64::new(0.0, -1.0 / x);
        DMatrix::from_row_slice(2, 2, &[y, -y, -y, y])
    }

    #[test]
    fn lossless_two_bus_transfer() {
        let y = two_bus(0.1);
        let kinds = [
            BusKind::Slack { v: 1.0, theta: 0.0 },
            BusKind::PV { p: -1.0, v: 1.0 },
        ];
        let pf = solve_power_flow(&y, &kinds).unwrap();
        assert!((pf.angle(0) - pf.angle(1) - 0.1f64.asin()).abs() < 1e-10);
        assert!((pf.p[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unloaded_network_is_flat() {
        let y = two_bus(0.2);
        let kinds = [
            BusKind::Slack { v: 1.0, theta: 0.0 },
            BusKind::PQ { p: 0.0, q: 0.0 },
        ];
        let pf = solve_power_flow(&y, &kinds).unwrap();
        assert!((pf.v[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(pf.iterations, 0);
    }

    #[test]
    fn pq_bus_with_load() {
        // Radial feeder: analytic check through the current.
        let z = Complex64::new(0.01, 0.1);
        let ys = z.inv();
        let y = DMatrix::from_row_slice(2, 2, &[ys, -ys, -ys, ys]);
        let kinds = [
            BusKind::Slack { v: 1.0, theta: 0.0 },
            BusKind::PQ { p: -0.5, q: -0.2 },
        ];
        let pf = solve_power_flow(&y, &kinds).unwrap();
        let i = (pf.v[0] - pf.v[1]) / z;
        let s_load = pf.v[1] * i.conj();
        assert!((s_load - Complex64::new(0.5, 0.2)).norm() < 1e-10);
        let flow = branch_flow(pf.v[0], pf.v[1], ys, Complex64::new(0.0, 0.0));
        assert!((flow.re - pf.p[0]).abs() < 1e-10);
    }

    #[test]
    fn infeasible_transfer_diverges() {
        let y = two_bus(0.5);
        let kinds = [
            BusKind::Slack { v: 1.0, theta: 0.0 },
            BusKind::PQ { p: -5.0, q: 0.0 },
        ];
        assert!(matches!(solve_power_flow(&y, &kinds), Err(Error::PowerFlowDiverged { .. }) | Err(Error::Singular(_))));
    }

    #[test]
    fn requires_single_slack() {
        let y = two_bus(0.1);
        let kinds = [BusKind::PQ { p: 0.0, q: 0.0 }, BusKind::PQ { p: 0.0, q: 0.0 }];
        assert!(solve_power_flow(&y, &kinds).is_err());
    }
}
