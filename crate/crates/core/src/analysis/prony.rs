//! Classical Prony analysis: least-squares linear prediction, companion
//! roots, least-squares amplitudes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::analysis::eigen::{damping_ratio, eigenvalues};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PronyMode {
    /// Continuous-time root `σ + jω`.
    pub s: Complex64,
    /// Complex amplitude of `e^{st}`; conjugate pairs share the real signal.
    pub residue: Complex64,
}

impl PronyMode {
    pub fn amplitude(&self) -> f64 {
        self.residue.norm()
    }

    pub fn sigma(&self) -> f64 {
        self.s.re
    }

    pub fn frequency_hz(&self) -> f64 {
        self.s.im / (2.0 * std::f64::consts::PI)
    }

    pub fn phase(&self) -> f64 {
        self.residue.arg()
    }

    pub fn damping_ratio(&self) -> f64 {
        damping_ratio(self.s)
    }

    /// `Σ |r e^{s t}|²` over the fitted window, a measure of mode energy.
    fn energy(&self, dt: f64, n: usize) -> f64 {
        let q = (2.0 * self.s.re * dt).exp();
        let geometric = if (q - 1.0).abs() < 1e-12 {
            n as f64
        } else {
            (q.powi(n as i32) - 1.0) / (q - 1.0)
        };
        self.residue.norm_sqr() * geometric
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PronyFit {
    /// Modes with `Im s >= 0`, sorted by descending energy. A real signal's
    /// conjugate partners are implied.
    pub modes: Vec<PronyMode>,
    /// `‖y − ŷ‖ / ‖y‖`.
    pub residual: f64,
}

impl PronyFit {
    /// Mode closest in frequency to `f_hz`.
    pub fn nearest(&self, f_hz: f64) -> Option<&PronyMode> {
        self.modes
            .iter()
            .min_by(|a, b| (a.frequency_hz() - f_hz).abs().total_cmp(&(b.frequency_hz() - f_hz).abs()))
    }
}

/// Fits `order` exponentials to uniformly sampled `y`.
pub fn prony_fit(y: &[f64], dt: f64, order: usize) -> Result<PronyFit> {
    let n = y.len();
    if order == 0 || n < 3 * order {
        return Err(Error::InsufficientWindow {
            needed: 3 * order.max(1),
            available: n,
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("sample interval must be positive".into()));
    }
    let rows = n - order;
    // y[k] = −Σ a_i y[k−i]
    let h = DMatrix::from_fn(rows, order, |r, c| y[r + order - 1 - c]);
    let rhs = DVector::from_fn(rows, |r, _| -y[r + order]);
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-13 * rows as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < order {
        return Err(Error::RankDeficient { rank, order });
    }
    let a = svd.solve(&rhs, tol).map_err(|e| Error::Eigen(e.to_string()))?;

    // Companion matrix of z^p + a_1 z^{p−1} + … + a_p.
    let mut comp = DMatrix::zeros(order, order);
    for c in 0..order {
        comp[(0, c)] = -a[c];
    }
    for r in 1..order {
        comp[(r, r - 1)] = 1.0;
    }
    let z = eigenvalues(&comp)?;
    let s: Vec<Complex64> = z.iter().map(|zi| zi.ln() / dt).collect();

    // Amplitudes by least squares on the Vandermonde system.
    let v = DMatrix::from_fn(n, order, |k, i| z[i].powu(k as u32));
    let yc = DVector::from_fn(n, |k, _| Complex64::new(y[k], 0.0));
    let vs = v.clone().svd(true, true);
    let r = vs
        .solve(&yc, vs.singular_values.max() * 1e-14)
        .map_err(|e| Error::Eigen(e.to_string()))?;
    let fit = &v * &r;
    let err = (fit - &yc).norm();
    let norm = yc.norm();
    let residual = if norm > 0.0 { err / norm } else { err };

    let mut modes: Vec<PronyMode> = s
        .iter()
        .zip(r.iter())
        .filter(|(si, _)| si.im >= -1e-9)
        .map(|(si, ri)| PronyMode {
            s: if si.im.abs() < 1e-9 { Complex64::new(si.re, 0.0) } else { *si },
            residue: *ri,
        })
        .collect();
    modes.sort_by(|a, b| b.energy(dt, n).total_cmp(&a.energy(dt, n)));
    Ok(PronyFit { modes, residual })
}

/// Singular values of the Hankel matrix built from `y` with `cols` columns,
/// normalized by the largest.
pub fn hankel_spectrum(y: &[f64], cols: usize) -> Vec<f64> {
    let cols = cols.min(y.len() / 2).max(1);
    let rows = y.len() + 1 - cols;
    let h = DMatrix::from_fn(rows, cols, |r, c| y[r + c]);
    let s = h.singular_values();
    let max = s.max();
    let mut v: Vec<f64> = s.iter().map(|x| if max > 0.0 { x / max } else { 0.0 }).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Suggested model order: the smallest number of Hankel singular values
/// whose squared sum reaches `1 − missing_energy` of the total.
pub fn suggest_order(y: &[f64], max_order: usize, missing_energy: f64) -> usize {
    let s = hankel_spectrum(y, max_order + 1);
    let total: f64 = s.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 1;
    }
    let mut acc = 0.0;
    for (k, v) in s.iter().take(max_order).enumerate() {
        acc += v * v;
        if acc >= (1.0 - missing_energy) * total {
            return k + 1;
        }
    }
    max_order.min(s.len()).max(1)
}

/// Fits at the suggested order, falling back to the numerical rank of the
/// prediction matrix when the suggestion over-shoots it.
pub fn prony_auto(y: &[f64], dt: f64, max_order: usize, missing_energy: f64) -> Result<PronyFit> {
    let order = suggest_order(y, max_order, missing_energy);
    match prony_fit(y, dt, order) {
        Err(Error::RankDeficient { rank, .. }) if rank > 0 => prony_fit(y, dt, rank),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn damped_cosine() {
        let dt = 1e-3;
        let y: Vec<f64> = (0..1000)
            .map(|k| {
                let t = k as f64 * dt;
                (-2.0 * t).exp() * (2.0 * PI * 43.0 * t).cos()
            })
            .collect();
        let fit = prony_fit(&y, dt, 2).unwrap();
        let m = &fit.modes[0];
        assert!((m.frequency_hz() - 43.0).abs() < 0.01);
        assert!((m.sigma() + 2.0).abs() < 0.01);
        assert!(fit.residual < 1e-9);
        assert!((m.amplitude() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn constant_signal() {
        let y = vec![1.0; 50];
        let fit = prony_fit(&y, 1e-3, 1).unwrap();
        assert!(fit.modes[0].s.norm() < 1e-9);
        assert!((fit.modes[0].residue.re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn short_record_rejected() {
        assert!(matches!(prony_fit(&[1.0; 5], 1e-3, 2), Err(Error::InsufficientWindow { .. })));
    }

    #[test]
    fn over_specified_order_is_rank_deficient() {
        let y: Vec<f64> = (0..200).map(|k| (0.1 * k as f64).cos()).collect();
        assert!(matches!(prony_fit(&y, 1.0, 6), Err(Error::RankDeficient { .. })));
        assert_eq!(suggest_order(&y, 10, 1e-12), 2);
    }
}
