use nalgebra::DVector;
use serde::{Deserialize, Serialize, Serializer};

use super::linalg::{orthonormal_basis, project_out};
use super::ols::ols_fit;
use super::{Design, RobustFit};
use crate::error::{Error, Result};
use crate::stats;

/// Writes infinite values as the string `"inf"`.
fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifEntry {
    pub name: String,
    /// `f64::INFINITY` marks perfect collinearity.
    #[serde(serialize_with = "finite_or_inf")]
    pub vif: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifReport {
    pub entries: Vec<VifEntry>,
    #[serde(serialize_with = "finite_or_inf")]
    pub mean_vif: f64,
}

/// Variance inflation factors, 1 / (1 - R^2_j), where R^2_j comes from
/// regressing predictor j on the other predictors plus an intercept.
pub fn vif(names: &[String], columns: &[Vec<f64>]) -> Result<VifReport> {
    if columns.len() < 2 {
        return Err(Error::InvalidArgument("VIF needs at least 2 predictors".into()));
    }
    if names.len() != columns.len() {
        return Err(Error::LengthMismatch { expected: columns.len(), actual: names.len() });
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidArgument("VIF columns differ in length".into()));
    }
    let entries = (0..columns.len())
        .map(|j| {
            let mut basis_cols = vec![DVector::from_element(n, 1.0)];
            basis_cols.extend(
                columns
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, c)| DVector::from_column_slice(c)),
            );
            let (basis, _) = orthonormal_basis(&basis_cols);
            let target = DVector::from_column_slice(&columns[j]);
            let rss = project_out(&basis, &target).norm_squared();
            let tss = stats::sum_sq_dev(&columns[j]);
            let vif = if tss == 0.0 || rss <= 1e-20 * tss { f64::INFINITY } else { tss / rss };
            VifEntry { name: names[j].clone(), vif }
        })
        .collect::<Vec<_>>();
    let mean_vif = entries.iter().map(|e| e.vif).sum::<f64>() / entries.len() as f64;
    Ok(VifReport { entries, mean_vif })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinktestResult {
    pub hat_coef: f64,
    pub hatsq_coef: f64,
    pub hatsq_se: f64,
    pub hatsq_p: f64,
    /// `hatsq_p > 0.05`.
    pub pass: bool,
}

/// Specification test: regress y on (yhat, yhat^2) with an intercept, where
/// yhat comes from `base_fit`; a significant yhat^2 term flags a
/// misspecified model.
pub fn linktest(design: &Design, y: &[f64], base_fit: &RobustFit) -> Result<LinktestResult> {
    let hat = design.predict(&base_fit.coefficients);
    let spread = stats::sum_sq_dev(&hat);
    let mean_sq = stats::mean(&hat).powi(2);
    if spread <= 1e-24 * (1.0 + mean_sq) * hat.len() as f64 {
        return Err(Error::RankDeficient(vec!["_hatsq".into()]));
    }
    let hatsq: Vec<f64> = hat.iter().map(|v| v * v).collect();
    let d = Design::with_intercept(&["_hat".to_string(), "_hatsq".to_string()], &[hat, hatsq])?;
    let fit = ols_fit(&d, y)?;
    Ok(LinktestResult {
        hat_coef: fit.coefficients[1],
        hatsq_coef: fit.coefficients[2],
        hatsq_se: fit.std_errors[2],
        hatsq_p: fit.p_values[2],
        pass: fit.p_values[2] > 0.05,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub vif: VifReport,
    pub linktest: LinktestResult,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn orthogonal_predictors() {
        let a = vec![1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0];
        let r = vif(&["a".into(), "b".into()], &[a, b]).unwrap();
        for e in &r.entries {
            assert!((e.vif - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_predictor_is_infinite() {
        let a = vec![1.0, 2.0, 4.0, 3.0, 7.0];
        let r = vif(&["a".into(), "b".into()], &[a.clone(), a]).unwrap();
        assert!(r.entries.iter().all(|e| e.vif.is_infinite()));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["mean_vif"], "inf");
        assert!(vif(&["a".into()], &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn constant_fit_has_no_linktest() {
        let d = Design::from_matrix(vec!["intercept".into()], DMatrix::from_element(5, 1, 1.0)).unwrap();
        let y = [1.0, 2.0, 3.0, 2.0, 1.0];
        let fit = ols_fit(&d, &y).unwrap();
        assert!(linktest(&d, &y, &fit).is_err());
    }
}
