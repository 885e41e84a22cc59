use nalgebra::{DMatrix, DVector};

use super::linalg::least_squares;
use super::{t_inference, Design, FitMethod, RobustFit};
use crate::error::{Error, Result};

fn check_response(design: &Design, y: &[f64]) -> Result<DVector<f64>> {
    if y.len() != design.n() {
        return Err(Error::LengthMismatch { expected: design.n(), actual: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("response contains non-finite values".into()));
    }
    Ok(DVector::from_column_slice(y))
}

/// Ordinary least squares with classical standard errors.
pub fn ols_fit(design: &Design, y: &[f64]) -> Result<RobustFit> {
    let yv = check_response(design, y)?;
    let (beta, xtx_inv) = least_squares(&design.x, &yv, &design.names)?;
    let fitted = &design.x * &beta;
    let resid = &yv - &fitted;
    let (n, p) = (design.n(), design.p());
    let df = n - p;
    let sigma2 = resid.norm_squared() / df as f64;
    let se: Vec<f64> = (0..p).map(|j| (sigma2 * xtx_inv[(j, j)]).max(0.0).sqrt()).collect();
    let beta = beta.as_slice().to_vec();
    let (p_values, ci_low, ci_high) = t_inference(&beta, &se, df);
    Ok(RobustFit {
        method: FitMethod::Ols,
        terms: design.names.clone(),
        coefficients: beta,
        std_errors: se,
        p_values,
        ci_low,
        ci_high,
        scale: sigma2.sqrt(),
        iterations: 1,
        converged: true,
        weights: vec![1.0; n],
        fitted: fitted.as_slice().to_vec(),
        residuals: resid.as_slice().to_vec(),
        df_resid: df,
        warnings: Vec::new(),
        trace: Vec::new(),
    })
}

/// HC1 sandwich errors: (X'X)^-1 X' diag(e^2) X (X'X)^-1 * n / (n - p).
pub fn hc1_standard_errors(fit: &RobustFit, design: &Design, y: &[f64]) -> Result<Vec<f64>> {
    let yv = check_response(design, y)?;
    if fit.coefficients.len() != design.p() {
        return Err(Error::LengthMismatch { expected: design.p(), actual: fit.coefficients.len() });
    }
    let (_, xtx_inv) = least_squares(&design.x, &yv, &design.names)?;
    let beta = DVector::from_column_slice(&fit.coefficients);
    let e = &yv - &design.x * beta;
    let (n, p) = (design.n(), design.p());
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..n {
        let xi = design.x.row(i).transpose();
        meat += (e[i] * e[i]) * &xi * xi.transpose();
    }
    let cov = &xtx_inv * meat * &xtx_inv * (n as f64 / (n - p) as f64);
    Ok((0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect())
}

/// OLS coefficients with HC1 standard errors, p-values and intervals.
pub fn ols_hc1_fit(design: &Design, y: &[f64]) -> Result<RobustFit> {
    let mut fit = ols_fit(design, y)?;
    let se = hc1_standard_errors(&fit, design, y)?;
    let (p, lo, hi) = t_inference(&fit.coefficients, &se, fit.df_resid);
    fit.method = FitMethod::OlsHc1;
    fit.std_errors = se;
    fit.p_values = p;
    fit.ci_low = lo;
    fit.ci_high = hi;
    Ok(fit)
}
