use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::least_squares;
use super::ols::ols_fit;
use super::{t_inference, Design, FitMethod, RobustFit};
use crate::error::{Error, Result};
use crate::stats;

/// Normal-consistency constant for the MAD.
const MAD_CONSISTENCY: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrlsConfig {
    pub huber_c: f64,
    pub bisquare_c: f64,
    /// Convergence threshold on the largest absolute coefficient change.
    pub tol: f64,
    /// Iteration cap, applied to each stage separately.
    pub max_iter: usize,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        IrlsConfig { huber_c: 1.345, bisquare_c: 4.685, tol: 1e-6, max_iter: 50 }
    }
}

/// One weighted least-squares step, for auditing the iteration path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlsStep {
    pub stage: String,
    pub scale: f64,
    /// Huber objective sum rho(r / scale) before and after the step, at
    /// the step's fixed scale. Zero in the bisquare stage.
    pub objective_before: f64,
    pub objective_after: f64,
    pub max_change: f64,
}

pub fn huber_weight(u: f64, c: f64) -> f64 {
    let a = u.abs();
    if a <= c {
        1.0
    } else {
        c / a
    }
}

pub fn huber_rho(u: f64, c: f64) -> f64 {
    let a = u.abs();
    if a <= c {
        0.5 * u * u
    } else {
        c * a - 0.5 * c * c
    }
}

pub fn bisquare_weight(u: f64, c: f64) -> f64 {
    if u.abs() >= c {
        0.0
    } else {
        let t = u / c;
        (1.0 - t * t).powi(2)
    }
}

/// Median absolute deviation about the median, divided by 0.6745.
pub fn mad_scale(residuals: &[f64]) -> f64 {
    let med = stats::median(residuals);
    let dev: Vec<f64> = residuals.iter().map(|r| (r - med).abs()).collect();
    stats::median(&dev) / MAD_CONSISTENCY
}

fn wls(design: &Design, y: &DVector<f64>, w: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let xw = DMatrix::from_fn(design.n(), design.p(), |i, j| design.x[(i, j)] * sw[i]);
    let yw = DVector::from_fn(design.n(), |i, _| y[i] * sw[i]);
    least_squares(&xw, &yw, &design.names)
}

fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Two-stage M-estimation: Huber IRLS with the MAD scale re-estimated at
/// every step, then bisquare IRLS from the Huber solution with the scale
/// frozen. Standard errors come from s^2 (X'WX)^-1 with
/// s^2 = sum w r^2 / (sum w - p), evaluated at the final weights.
pub fn irls_m_fit(design: &Design, y: &[f64], config: &IrlsConfig) -> Result<RobustFit> {
    if !(config.huber_c > 0.0 && config.bisquare_c > 0.0 && config.tol > 0.0 && config.max_iter > 0) {
        return Err(Error::InvalidArgument(format!("invalid IRLS configuration {config:?}")));
    }
    let start = ols_fit(design, y)?;
    let yv = DVector::from_column_slice(y);
    let (n, p) = (design.n(), design.p());
    let resid = |beta: &DVector<f64>| -> Vec<f64> { (&yv - &design.x * beta).as_slice().to_vec() };

    let mut beta = DVector::from_column_slice(&start.coefficients);
    let mut r = resid(&beta);
    let y_scale = 1.0 + y.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let perfect = |s: f64| s <= 1e-10 * y_scale;

    let mut fit = start;
    fit.method = FitMethod::MHuberBisquare;
    fit.iterations = 1;

    let scale0 = mad_scale(&r);
    if perfect(scale0) {
        fit.scale = scale0;
        fit.warnings.push("residual scale is zero; returning the exact least-squares fit".into());
        return Ok(fit);
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut scale = scale0;
    let mut huber_converged = false;
    for _ in 0..config.max_iter {
        scale = mad_scale(&r);
        if perfect(scale) {
            huber_converged = true;
            break;
        }
        let w: Vec<f64> = r.iter().map(|&ri| huber_weight(ri / scale, config.huber_c)).collect();
        let before: f64 = r.iter().map(|&ri| huber_rho(ri / scale, config.huber_c)).sum();
        let (next, _) = wls(design, &yv, &w)?;
        let change = max_abs_diff(&next, &beta);
        beta = next;
        r = resid(&beta);
        let after: f64 = r.iter().map(|&ri| huber_rho(ri / scale, config.huber_c)).sum();
        iterations += 1;
        trace.push(IrlsStep { stage: "huber".into(), scale, objective_before: before, objective_after: after, max_change: change });
        if change <= config.tol {
            huber_converged = true;
            break;
        }
    }

    let mut bisquare_converged = false;
    for _ in 0..config.max_iter {
        let w: Vec<f64> = r.iter().map(|&ri| bisquare_weight(ri / scale, config.bisquare_c)).collect();
        let (next, _) = wls(design, &yv, &w)?;
        let change = max_abs_diff(&next, &beta);
        beta = next;
        r = resid(&beta);
        iterations += 1;
        trace.push(IrlsStep { stage: "bisquare".into(), scale, objective_before: 0.0, objective_after: 0.0, max_change: change });
        if change <= config.tol {
            bisquare_converged = true;
            break;
        }
    }

    let weights: Vec<f64> = r.iter().map(|&ri| bisquare_weight(ri / scale, config.bisquare_c)).collect();
    let (_, cov_unscaled) = wls(design, &yv, &weights)?;
    let wsum: f64 = weights.iter().sum();
    let wrss: f64 = weights.iter().zip(&r).map(|(w, e)| w * e * e).sum();
    let s2 = if wsum > p as f64 { wrss / (wsum - p as f64) } else { f64::NAN };
    let se: Vec<f64> = (0..p).map(|j| (s2 * cov_unscaled[(j, j)]).max(0.0).sqrt()).collect();
    let coefficients = beta.as_slice().to_vec();
    let df = n - p;
    let (p_values, ci_low, ci_high) = t_inference(&coefficients, &se, df);

    fit.coefficients = coefficients;
    fit.std_errors = se;
    fit.p_values = p_values;
    fit.ci_low = ci_low;
    fit.ci_high = ci_high;
    fit.scale = scale;
    fit.iterations = iterations;
    fit.converged = huber_converged && bisquare_converged;
    fit.fitted = design.predict(&fit.coefficients);
    fit.residuals = r;
    fit.weights = weights;
    fit.df_resid = df;
    fit.trace = trace;
    if !fit.converged {
        fit.warnings.push(format!(
            "IRLS did not converge within {} iterations per stage (huber: {huber_converged}, bisquare: {bisquare_converged})",
            config.max_iter
        ));
    }
    Ok(fit)
}
