//! Eigenvalues, eigenvectors, participation factors and mode shapes.
//!
//! Eigenvalues come from a real Schur decomposition of the balanced matrix.
//! Right and left eigenvectors are then refined on the original matrix by
//! inverse iteration with a complex LU.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real part above which a mode counts as unstable. The rotational symmetry
/// of the models leaves one eigenvalue at the origin up to rounding.
pub const UNSTABLE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub lambda: Complex64,
    pub right: DVector<Complex64>,
    /// Row eigenvector scaled so that `left · right = 1`.
    pub left: DVector<Complex64>,
}

impl Mode {
    pub fn frequency_hz(&self) -> f64 {
        frequency_hz(self.lambda)
    }

    pub fn damping_ratio(&self) -> f64 {
        damping_ratio(self.lambda)
    }

    pub fn is_unstable(&self) -> bool {
        self.lambda.re > UNSTABLE_THRESHOLD
    }

    /// Participation magnitudes `|φ_k ψ_k|` normalized to a maximum of one.
    pub fn participation(&self) -> Vec<f64> {
        let p: Vec<f64> = self.right.iter().zip(self.left.iter()).map(|(r, l)| (r * l).norm()).collect();
        let max = p.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            p.iter().map(|v| v / max).collect()
        } else {
            p
        }
    }

    /// Right-eigenvector angles in degrees relative to the entry of largest
    /// magnitude.
    pub fn shape_angles(&self) -> Vec<f64> {
        let (_, reference) = self
            .right
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(k, z)| (k, *z))
            .unwrap_or((0, Complex64::new(1.0, 0.0)));
        self.right.iter().map(|z| (z / reference).arg().to_degrees()).collect()
    }
}

pub fn frequency_hz(lambda: Complex64) -> f64 {
    lambda.im / (2.0 * std::f64::consts::PI)
}

/// `ζ = −Re λ / |λ|`; unstable modes have negative damping.
pub fn damping_ratio(lambda: Complex64) -> f64 {
    let n = lambda.norm();
    if n == 0.0 {
        0.0
    } else {
        -lambda.re / n
    }
}

/// Diagonal similarity scaling by powers of two that equalizes row and
/// column norms. Returns the balanced matrix and the scaling `d`
/// (`B = D⁻¹ A D`).
pub fn balance(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut b = a.clone();
    let mut d = vec![1.0; n];
    let radix = 2.0f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut c2, r2) = (c, r);
            while c2 < r2 / radix {
                c2 *= radix;
                f *= radix;
            }
            let mut r3 = r2;
            while c2 >= r3 * radix {
                c2 /= radix;
                r3 *= radix;
                f /= radix;
            }
            let c_new = c * f;
            let r_new = r / f;
            if c_new + r_new < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    (b, d)
}

/// All eigenvalues of `a`.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Eigen("matrix is not square".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let (b, _) = balance(a);
    let schur = b
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn complex_matrix(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|v| Complex64::new(v, 0.0))
}

fn inverse_iteration(a: &DMatrix<Complex64>, lambda: Complex64) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut m = a.clone();
    for k in 0..n {
        m[(k, k)] -= shift;
    }
    let lu = m.lu();
    let mut v = DVector::from_fn(n, |k, _| Complex64::new(1.0 + 0.1 * (k as f64).sin(), 0.3 * (k as f64).cos()));
    for _ in 0..4 {
        let w = lu.solve(&v).ok_or_else(|| Error::Eigen("inverse iteration failed".into()))?;
        let norm = w.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Eigen("inverse iteration failed".into()));
        }
        v = w.unscale(norm);
    }
    Ok(v)
}

/// Eigenvalues with right and left eigenvectors.
pub fn modes(a: &DMatrix<f64>) -> Result<Vec<Mode>> {
    let lambdas = eigenvalues(a)?;
    let ac = complex_matrix(a);
    let at = ac.transpose();
    lambdas
        .into_iter()
        .map(|lambda| {
            let right = inverse_iteration(&ac, lambda)?;
            let left = inverse_iteration(&at, lambda)?;
            let s = left.iter().zip(right.iter()).map(|(l, r)| l * r).sum::<Complex64>();
            if s.norm() < 1e-300 {
                return Err(Error::Eigen(format!("defective eigenvalue {lambda}")));
            }
            Ok(Mode {
                lambda,
                right,
                left: left.unscale(1.0).map(|z| z / s),
            })
        })
        .collect()
}

/// One mode of a conjugate pair (or a real mode) with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    pub lambda: Complex64,
    pub f_hz: f64,
    pub zeta_pct: f64,
    pub participation: Vec<f64>,
    pub shape_angle: Vec<f64>,
}

impl ModeReport {
    pub fn is_unstable(&self) -> bool {
        self.lambda.re > UNSTABLE_THRESHOLD
    }

    pub fn is_oscillatory(&self) -> bool {
        self.lambda.im > 1e-6 * self.lambda.norm()
    }
}

/// Mode reports for `Im λ ≥ 0`, sorted by descending real part.
pub fn mode_reports(a: &DMatrix<f64>) -> Result<Vec<ModeReport>> {
    let mut out: Vec<ModeReport> = modes(a)?
        .into_iter()
        .filter(|m| m.lambda.im >= 0.0)
        .map(|m| ModeReport {
            lambda: m.lambda,
            f_hz: m.frequency_hz().abs(),
            zeta_pct: 100.0 * m.damping_ratio(),
            participation: m.participation(),
            shape_angle: m.shape_angles(),
        })
        .collect();
    out.sort_by(|a, b| b.lambda.re.total_cmp(&a.lambda.re));
    Ok(out)
}

/// Eigenvalues in the upper half plane (plus real ones), sorted by
/// descending real part.
pub fn upper_half(lambdas: &[Complex64]) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = lambdas.iter().copied().filter(|z| z.im >= 0.0).collect();
    v.sort_by(|a, b| b.re.total_cmp(&a.re));
    v
}

/// Unstable complex pairs, reported once with positive frequency.
pub fn unstable_pairs(lambdas: &[Complex64]) -> Vec<Complex64> {
    upper_half(lambdas)
        .into_iter()
        .filter(|z| z.re > UNSTABLE_THRESHOLD && z.im > 1e-6 * z.norm())
        .collect()
}

/// Indices of the `k` largest entries, descending.
pub fn top_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx.truncate(k);
    idx
}
