use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::capacity::linalg::{center_rows, frobenius, spectral_norm};
use crate::error::{Error, Result};

/// `(alpha, lambda)` for the residual block `(eta H + A H W - 1 b^T) D`:
///
/// alpha = |(eta PH + P A H W) D| / |(eta PH + A PH W - 1 b^T) D|,
/// lambda = |(eta PH + A PH W - 1 b^T) D| / |PH|, Frobenius norms throughout.
pub fn residual_coefficients(
    h: &ArrayView2<f64>,
    a: &ArrayView2<f64>,
    wvo: &ArrayView2<f64>,
    b: &Array1<f64>,
    d: &Array2<f64>,
    eta: f64,
) -> Result<(f64, f64)> {
    let ph = center_rows(h);
    let ahw = a.dot(h).dot(wvo);
    let num = (&ph * eta + &center_rows(&ahw.view())).dot(d);
    let den = (&ph * eta + &a.dot(&ph).dot(wvo) - b).dot(d);
    let den_norm = frobenius(&den.view());
    let ph_norm = frobenius(&ph.view());
    if den_norm == 0.0 {
        return Err(Error::ZeroDenominator("alpha coefficient"));
    }
    if ph_norm == 0.0 {
        return Err(Error::ZeroDenominator("lambda coefficient"));
    }
    Ok((frobenius(&num.view()) / den_norm, den_norm / ph_norm))
}

pub fn alpha_coefficient(
    h: &ArrayView2<f64>,
    a: &ArrayView2<f64>,
    wvo: &ArrayView2<f64>,
    b: &Array1<f64>,
    d: &Array2<f64>,
) -> Result<f64> {
    let ph = center_rows(h);
    let num = (&ph + &center_rows(&a.dot(h).dot(wvo).view())).dot(d);
    let den = (&ph + &a.dot(&ph).dot(wvo) - b).dot(d);
    let den_norm = frobenius(&den.view());
    if den_norm == 0.0 {
        return Err(Error::ZeroDenominator("alpha coefficient"));
    }
    Ok(frobenius(&num.view()) / den_norm)
}

pub fn lambda_coefficient(
    h: &ArrayView2<f64>,
    a: &ArrayView2<f64>,
    wvo: &ArrayView2<f64>,
    b: &Array1<f64>,
    d: &Array2<f64>,
) -> Result<f64> {
    residual_coefficients(h, a, wvo, b, d, 1.0).map(|(_, lambda)| lambda)
}

/// `|D'|_2 (1 + |W1|_2 |W2|_2)`.
pub fn gamma_coefficient(
    d_prime: &ArrayView2<f64>,
    w1: &ArrayView2<f64>,
    w2: &ArrayView2<f64>,
) -> Result<f64> {
    gamma_with_eta(&d_prime.to_owned(), w1, w2, 1.0)
}

/// `|D'|_2 (eta + |W1|_2 |W2|_2)`, for residuals weighted by `eta`.
pub fn gamma_with_eta(
    d_prime: &Array2<f64>,
    w1: &ArrayView2<f64>,
    w2: &ArrayView2<f64>,
    eta: f64,
) -> Result<f64> {
    let dn = spectral_norm(&d_prime.view())?;
    if dn == 0.0 {
        return Ok(0.0);
    }
    Ok(dn * (eta + spectral_norm(w1)? * spectral_norm(w2)?))
}

/// Diagonal approximation `(X - 1 b^T) D` of a layer norm: `D = diag(gain) *
/// mean(1/std)` over the given tokens and `b = -bias / diag(D)`.
pub fn ln_scaling(
    inv_std: &ArrayView1<f64>,
    gain: &Array2<f64>,
    bias: &Array2<f64>,
) -> (Array2<f64>, Array1<f64>) {
    let mean_inv = inv_std.mean().unwrap_or(1.0);
    let diag = gain.row(0).mapv(|g| g * mean_inv);
    let b = ndarray::Zip::from(&diag)
        .and(bias.row(0))
        .map_collect(|&dg, &bi| if dg == 0.0 { 0.0 } else { -bi / dg });
    (Array2::from_diag(&diag), b)
}
