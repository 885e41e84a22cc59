//! Linear models for affinity: OLS, OLS with HC1 errors, and a two-stage
//! Huber/bisquare M-estimator fitted by IRLS, plus VIF and linktest.

mod diagnostics;
mod irls;
mod linalg;
mod models;
mod ols;

pub use diagnostics::{linktest, vif, Diagnostics, LinktestResult, VifEntry, VifReport};
pub use irls::{bisquare_weight, huber_rho, huber_weight, irls_m_fit, mad_scale, IrlsConfig, IrlsStep};
pub use linalg::collinear_columns;
pub use models::{fit_affinity_models, fit_model, AffinityModels, DesignSpec, ModelFits, ModelReport};
pub use ols::{hc1_standard_errors, ols_fit, ols_hc1_fit};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Ols,
    OlsHc1,
    MHuberBisquare,
}

/// Named design matrix; one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

impl Design {
    /// Intercept column followed by `columns` in order.
    pub fn with_intercept(names: &[String], columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::InvalidArgument("design needs at least one predictor column".into()));
        }
        let mut all_names = vec![INTERCEPT.to_string()];
        all_names.extend(names.iter().cloned());
        let mut seen = std::collections::BTreeSet::new();
        for name in &all_names {
            if !seen.insert(name) {
                return Err(Error::InvalidArgument(format!("duplicate design column `{name}`")));
            }
        }
        for c in columns {
            if c.len() != n {
                return Err(Error::LengthMismatch { expected: n, actual: c.len() });
            }
        }
        let x = DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
        Ok(Design { names: all_names, x })
    }

    pub fn from_matrix(names: Vec<String>, x: DMatrix<f64>) -> Result<Self> {
        if names.len() != x.ncols() {
            return Err(Error::LengthMismatch { expected: x.ncols(), actual: names.len() });
        }
        Ok(Design { names, x })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn predict(&self, beta: &[f64]) -> Vec<f64> {
        (&self.x * DVector::from_column_slice(beta)).as_slice().to_vec()
    }
}

/// A fitted linear model with per-term inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustFit {
    pub method: FitMethod,
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Residual scale: sqrt(RSS / df) for OLS, the MAD scale for M-estimation.
    pub scale: f64,
    pub iterations: usize,
    pub converged: bool,
    pub weights: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub df_resid: usize,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<IrlsStep>,
}

impl RobustFit {
    pub fn coef(&self, term: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.coefficients[i])
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

/// t-based p-values and 95% intervals for coefficients with given errors.
pub(crate) fn t_inference(beta: &[f64], se: &[f64], df: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let df = df as f64;
    let crit = stats::t_quantile(0.975, df);
    let p = beta
        .iter()
        .zip(se)
        .map(|(&b, &s)| {
            if s > 0.0 {
                stats::t_two_sided_p(b / s, df)
            } else if b == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let lo = beta.iter().zip(se).map(|(b, s)| b - crit * s).collect();
    let hi = beta.iter().zip(se).map(|(b, s)| b + crit * s).collect();
    (p, lo, hi)
}
