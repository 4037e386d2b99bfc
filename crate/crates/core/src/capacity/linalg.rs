use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;

pub fn frobenius(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `P X` with `P = I - 11^T / rows`: subtracts the column means.
pub fn center_rows(x: &ArrayView2<f64>) -> Array2<f64> {
    match x.mean_axis(Axis(0)) {
        Some(mean) => x - &mean,
        None => x.to_owned(),
    }
}

/// Gram-matrix squarings applied before iterating; each one doubles the
/// exponent of the eigenvalue ratio per step, which matters when the top two
/// singular values nearly coincide.
const SQUARINGS: usize = 4;

/// Largest singular value by power iteration on `(A^T A)^16`. Converged once
/// the relative change of the Rayleigh estimate `sqrt(v^T A^T A v)` drops below
/// [`POWER_TOL`].
pub fn spectral_norm(a: &ArrayView2<f64>) -> Result<f64> {
    spectral_norm_with(a, POWER_TOL, POWER_MAX_ITERS)
}

pub fn spectral_norm_with(a: &ArrayView2<f64>, tol: f64, max_iters: usize) -> Result<f64> {
    let cols = a.ncols();
    if cols == 0 || a.nrows() == 0 || a.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let gram = a.t().dot(a);
    let mut op = gram.clone();
    for _ in 0..SQUARINGS {
        op = op.dot(&op);
        let scale = op.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 || !scale.is_finite() {
            break;
        }
        op /= scale;
    }
    // A fixed, generic start vector keeps the result deterministic.
    let mut v = Array1::from_shape_fn(cols, |i| 1.0 + 0.01 * (i as f64 + 1.0).sqrt());
    v /= v.dot(&v).sqrt();
    let mut sigma = 0.0;
    let mut last_change = f64::INFINITY;
    for _ in 0..max_iters {
        let mut w = op.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            // Start vector in the null space; fall back to a basis vector sweep.
            return Ok(basis_max(a));
        }
        w /= norm;
        v = w;
        let next = v.dot(&gram.dot(&v)).max(0.0).sqrt();
        last_change = (next - sigma).abs() / next;
        sigma = next;
        if last_change < tol {
            return Ok(sigma);
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        last_change,
    })
}

fn basis_max(a: &ArrayView2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0, f64::max)
}

/// `diag(d)` as a dense matrix.
pub fn diag(d: &Array1<f64>) -> Array2<f64> {
    Array2::from_diag(d)
}
