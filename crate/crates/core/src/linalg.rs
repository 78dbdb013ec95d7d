//! Small dense least-squares helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Ordinary least squares solution with classical standard errors.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ssr: f64,
}

/// Solves `min ||y - X b||` by Householder QR on column-scaled `X`.
///
/// Standard errors use `s^2 = ssr / (n - k)`. Rank deficiency (relative pivot
/// below 1e-10) is reported as [`Error::Singular`].
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n <= k {
        return Err(Error::TooFewPoints { needed: k + 1, got: n });
    }
    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    if norms.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::Singular("zero or non-finite regressor column".into()));
    }
    let mut xs = x.clone();
    for (j, s) in norms.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let qr = xs.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag) {
        return Err(Error::Singular("rank-deficient design matrix".into()));
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let rhs = qty.rows(0, k).into_owned();
    let beta_s = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let fitted = &xs * &beta_s;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Singular("triangular inverse failed".into()))?;
    let s2 = ssr / (n - k) as f64;
    let coefficients = (0..k).map(|j| beta_s[j] / norms[j]).collect();
    let std_errors = (0..k)
        .map(|j| (s2 * rinv.row(j).norm_squared()).sqrt() / norms[j])
        .collect();
    Ok(OlsFit {
        coefficients,
        std_errors,
        residuals,
        ssr,
    })
}

/// OLS of `y` on row-major regressors `rows` plus an intercept, which comes
/// first in the coefficients.
pub fn ols_with_intercept(rows: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let k = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidArgument("ragged regressor rows".into()));
    }
    let x = DMatrix::from_fn(rows.len(), k + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    ols(&x, y)
}

/// Spectral radius of the companion matrix of `x_t = c_1 x_{t-1} + ... + c_p x_{t-p}`.
///
/// The lag polynomial `1 - c_1 z - ... - c_p z^p` has all roots outside the
/// unit circle exactly when this radius is below one.
pub fn companion_spectral_radius(coeffs: &[f64]) -> f64 {
    let p = coeffs.len();
    if p == 0 {
        return 0.0;
    }
    let mut m = DMatrix::zeros(p, p);
    for (j, c) in coeffs.iter().enumerate() {
        m[(0, j)] = *c;
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_rows_match_explicit_design() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, ((i * i) % 5) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 - 0.5 * r[0] + 3.0 * r[1]).collect();
        let fit = ols_with_intercept(&rows, &y).unwrap();
        for (got, want) in fit.coefficients.iter().zip([2.0, -0.5, 3.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(ols_with_intercept(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn exact_line_fit() {
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..5).map(|i| 3.0 + 2.0 * i as f64).collect();
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.ssr < 1e-20);
    }

    #[test]
    fn standard_errors_match_textbook() {
        // y on [1, x]: se(slope) = s / sqrt(Sxx)
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.1, 1.9, 3.2, 3.8, 5.1];
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let fit = ols(&x, &ys).unwrap();
        let sxx: f64 = xs.iter().map(|v| (v - 3.0) * (v - 3.0)).sum();
        let s = (fit.ssr / 3.0).sqrt();
        assert!((fit.std_errors[1] - s / sxx.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_are_singular() {
        let x = DMatrix::from_fn(6, 2, |i, _| i as f64 + 1.0);
        assert!(matches!(ols(&x, &[1.0; 6]), Err(Error::Singular(_))));
    }

    #[test]
    fn companion_radius() {
        assert!((companion_spectral_radius(&[0.5]) - 0.5).abs() < 1e-12);
        // (1 - 0.9z)(1 + 0.5z) = 1 - 0.4z - 0.45z^2
        assert!((companion_spectral_radius(&[0.4, 0.45]) - 0.9).abs() < 1e-10);
        assert!(companion_spectral_radius(&[1.2]) > 1.0);
    }
}
