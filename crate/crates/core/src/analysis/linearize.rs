//! Central-difference linearization about an operating point.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assembly::SystemModel;

const REL_STEP: f64 = 1e-6;

/// `(A, B, C, D)` with state, input and output labels.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

fn step(v: f64, scale: f64) -> f64 {
    scale * v.abs().max(1.0)
}

fn columns<F>(n: usize, rows: usize, point: &[f64], scale: f64, f: F) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let h = step(point[j], scale);
            let mut xp = point.to_vec();
            let mut xm = point.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect();
    DMatrix::from_fn(rows, n, |i, j| cols[j][i])
}

/// `∂f/∂x` at `(x, u)`.
pub fn state_jacobian(model: &SystemModel, x: &[f64], u: &[f64]) -> DMatrix<f64> {
    let n = model.n_states();
    columns(n, n, x, REL_STEP, |xs| model.eval(xs, u))
}

fn linearize_with(model: &SystemModel, x0: &[f64], u0: &[f64], scale: f64) -> LinearModel {
    let n = model.n_states();
    let (m, p) = (model.n_inputs(), model.n_outputs());
    let a = columns(n, n, x0, scale, |xs| model.eval(xs, u0));
    let b = columns(m, n, u0, scale, |us| model.eval(x0, us));
    let c = columns(n, p, x0, scale, |xs| model.outputs(xs));
    let d = DMatrix::zeros(p, m);
    LinearModel {
        a,
        b,
        c,
        d,
        states: model.state_labels(),
        inputs: model.input_labels(),
        outputs: model.output_labels(),
    }
}

/// Linearizes `f` and `g` about `(x0, u0)`.
pub fn linearize(model: &SystemModel, x0: &[f64], u0: &[f64]) -> LinearModel {
    linearize_with(model, x0, u0, REL_STEP)
}

/// Largest entrywise change of `A` when the difference step is halved,
/// relative to `max|A|`.
pub fn step_sensitivity(model: &SystemModel, x0: &[f64], u0: &[f64]) -> f64 {
    let a1 = linearize_with(model, x0, u0, REL_STEP).a;
    let a2 = linearize_with(model, x0, u0, 0.5 * REL_STEP).a;
    (&a1 - &a2).amax() / a1.amax().max(f64::MIN_POSITIVE)
}

/// Entries of `A` whose value moves by more than `1e-3` relative when the
/// difference step is halved, as `(row, col, relative change)`. Entries below
/// `1e-9 max|A|` are skipped.
pub fn richardson_flags(model: &SystemModel, x0: &[f64], u0: &[f64]) -> Vec<(usize, usize, f64)> {
    let a1 = linearize_with(model, x0, u0, REL_STEP).a;
    let a2 = linearize_with(model, x0, u0, 0.5 * REL_STEP).a;
    let floor = 1e-9 * a1.amax();
    let mut out = Vec::new();
    for j in 0..a1.ncols() {
        for i in 0..a1.nrows() {
            let v = a1[(i, j)].abs().max(a2[(i, j)].abs());
            if v <= floor {
                continue;
            }
            let rel = (a1[(i, j)] - a2[(i, j)]).abs() / v;
            if rel > 1e-3 {
                out.push((i, j, rel));
            }
        }
    }
    out
}
