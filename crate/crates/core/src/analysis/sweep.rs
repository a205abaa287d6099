//! Maximum-singular-value frequency sweeps of `C(jωI − A)⁻¹B + D`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::linearize::LinearModel;
use crate::error::{Error, Result};

/// `points` frequencies spaced logarithmically over `[f_min, f_max]`, Hz.
pub fn log_grid(f_min: f64, f_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(f_min > 0.0 && f_max > f_min && points >= 2) {
        return Err(Error::InvalidArgument("frequency grid needs 0 < f_min < f_max and two points".into()));
    }
    let (a, b) = (f_min.ln(), f_max.ln());
    Ok((0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect())
}

/// Frequency response at one frequency.
pub fn frequency_response(lm: &LinearModel, f_hz: f64) -> Option<DMatrix<Complex64>> {
    let n = lm.a.nrows();
    let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f_hz);
    let b = lm.b.map(|v| Complex64::new(v, 0.0));
    let c = lm.c.map(|v| Complex64::new(v, 0.0));
    let d = lm.d.map(|v| Complex64::new(v, 0.0));
    if n == 0 {
        return Some(d);
    }
    let mut m = lm.a.map(|v| Complex64::new(-v, 0.0));
    for k in 0..n {
        m[(k, k)] += s;
    }
    let x = m.lu().solve(&b)?;
    if x.iter().any(|z| !z.is_finite()) {
        return None;
    }
    Some(c * x + d)
}

/// `σ_max` on each grid frequency; infinite where `jω` is an eigenvalue.
pub fn sigma_max_sweep(lm: &LinearModel, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::InvalidArgument("sweep frequencies must be positive".into()));
    }
    Ok(grid
        .par_iter()
        .map(|&f| match frequency_response(lm, f) {
            Some(g) if g.nrows() > 0 && g.ncols() > 0 => g.singular_values().max(),
            Some(_) => 0.0,
            None => f64::INFINITY,
        })
        .collect())
}

pub fn to_db(sigma: f64) -> f64 {
    20.0 * sigma.log10()
}

/// Indices of strict local maxima.
pub fn local_peaks(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&k| values[k] > values[k - 1] && values[k] >= values[k + 1])
        .collect()
}

/// Index of the grid point closest to `f` on a log scale.
pub fn nearest_index(grid: &[f64], f: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1.ln() - f.ln()).abs().total_cmp(&(b.1.ln() - f.ln()).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0)
}
