//! Affinity scores: how many conditions in a tract sit above the regional mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::StudyRegion;
use crate::stats;

/// Name under which the affinity score is exposed as a variable.
pub const AFFINITY: &str = "affinity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityResult {
    pub condition_names: Vec<String>,
    /// Unweighted regional mean per condition.
    pub thresholds: Vec<f64>,
    /// `flags[t][k]`: tract `t` strictly above the threshold for condition `k`.
    pub flags: Vec<Vec<bool>>,
    pub scores: Vec<u32>,
    /// Fraction of tracts whose score equals the number of conditions.
    pub share_max: f64,
}

impl AffinityResult {
    pub fn scores_f64(&self) -> Vec<f64> {
        self.scores.iter().map(|&s| s as f64).collect()
    }

    /// Number of tracts at each score 0..=K.
    pub fn score_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.condition_names.len() + 1];
        for &s in &self.scores {
            counts[s as usize] += 1;
        }
        counts
    }
}

pub fn condition_thresholds(region: &StudyRegion) -> Vec<f64> {
    (0..region.condition_count())
        .map(|k| {
            let col: Vec<f64> = region.prevalence.iter().map(|row| row[k]).collect();
            stats::mean(&col)
        })
        .collect()
}

pub fn exceedance_flags(region: &StudyRegion, thresholds: &[f64]) -> Result<Vec<Vec<bool>>> {
    if thresholds.len() != region.condition_count() {
        return Err(Error::LengthMismatch {
            expected: region.condition_count(),
            actual: thresholds.len(),
        });
    }
    Ok(region
        .prevalence
        .iter()
        .map(|row| row.iter().zip(thresholds).map(|(v, t)| v > t).collect())
        .collect())
}

pub fn affinity_scores(region: &StudyRegion) -> AffinityResult {
    let thresholds = condition_thresholds(region);
    let flags = exceedance_flags(region, &thresholds).expect("thresholds built from region");
    let k = region.condition_count() as u32;
    let scores: Vec<u32> = flags
        .iter()
        .map(|f| f.iter().filter(|&&b| b).count() as u32)
        .collect();
    let share_max = if k == 0 {
        0.0
    } else {
        scores.iter().filter(|&&s| s == k).count() as f64 / scores.len() as f64
    };
    AffinityResult {
        condition_names: region.condition_names.clone(),
        thresholds,
        flags,
        scores,
        share_max,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub variables: Vec<VariableSummary>,
}

impl DescriptiveStats {
    pub fn get(&self, name: &str) -> Option<&VariableSummary> {
        self.variables.iter().find(|v| v.name == name)
    }
}

pub fn summarize(name: &str, values: &[f64]) -> Result<VariableSummary> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "`{name}`: standard deviation needs at least 2 values"
        )));
    }
    Ok(VariableSummary {
        name: name.to_string(),
        mean: stats::mean(values),
        sd: stats::sample_sd(values),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n: values.len(),
    })
}

/// Conditions, then the affinity score, then indicators.
pub fn descriptive_stats(region: &StudyRegion) -> Result<DescriptiveStats> {
    let affinity = affinity_scores(region).scores_f64();
    let mut variables = Vec::new();
    for name in &region.condition_names {
        variables.push(summarize(name, &region.require_column(name)?)?);
    }
    variables.push(summarize(AFFINITY, &affinity)?);
    for name in &region.indicator_names {
        variables.push(summarize(name, &region.require_column(name)?)?);
    }
    Ok(DescriptiveStats { variables })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub r: Vec<Vec<f64>>,
    /// Two-sided p under a t reference with N - 2 degrees of freedom.
    pub p: Vec<Vec<f64>>,
    pub n: usize,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.r[i][j])
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = stats::mean(x);
    let my = stats::mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

pub fn correlation_p(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = n as f64 - 2.0;
    let t = r * (df / (1.0 - r * r)).sqrt();
    stats::t_two_sided_p(t, df)
}

/// Pearson matrix over named columns of equal length.
pub fn correlation_of_columns(names: &[String], columns: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let n = columns.first().map_or(0, Vec::len);
    if n < 3 {
        return Err(Error::InvalidArgument(
            "correlation p-values need at least 3 observations".into(),
        ));
    }
    for (name, col) in names.iter().zip(columns) {
        if col.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: col.len() });
        }
        if stats::sum_sq_dev(col) == 0.0 {
            return Err(Error::ZeroVariance(name.clone()));
        }
    }
    let m = names.len();
    let mut r = vec![vec![1.0; m]; m];
    let mut p = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = pearson(&columns[i], &columns[j]);
            r[i][j] = v;
            r[j][i] = v;
            let pv = correlation_p(v, n);
            p[i][j] = pv;
            p[j][i] = pv;
        }
    }
    Ok(CorrelationMatrix { names: names.to_vec(), r, p, n })
}

/// Resolves each variable (a condition, an indicator, or `affinity`) and
/// builds their correlation matrix.
pub fn correlation_matrix(region: &StudyRegion, variables: &[&str]) -> Result<CorrelationMatrix> {
    let mut affinity = None;
    let columns = variables
        .iter()
        .map(|&name| {
            if name == AFFINITY {
                Ok(affinity
                    .get_or_insert_with(|| affinity_scores(region).scores_f64())
                    .clone())
            } else {
                region.require_column(name)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
    correlation_of_columns(&names, &columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MultiPolygon, Polygon, Ring};
    use crate::ingest::{StudyRegion, TractId, ValidationReport, ValueKind};

    fn region(rows: Vec<Vec<f64>>) -> StudyRegion {
        let k = rows[0].len();
        let n = rows.len();
        let sq = MultiPolygon {
            polygons: vec![Polygon {
                exterior: Ring::closed(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).0,
                holes: vec![],
            }],
        };
        StudyRegion {
            tract_ids: (0..n).map(|i| TractId::new(format!("t{i:03}")).unwrap()).collect(),
            condition_names: (0..k).map(|i| format!("c{i}")).collect(),
            prevalence: rows,
            indicator_names: vec!["poverty".into()],
            indicator_kinds: vec![ValueKind::Percent],
            indicators: (0..n).map(|i| vec![i as f64]).collect(),
            geometry: vec![sq; n],
            crs_note: String::new(),
            validation: ValidationReport::default(),
        }
    }

    #[test]
    fn threshold_is_mean() {
        let r = region(vec![vec![10.0, 5.0], vec![12.0, 5.0]]);
        assert_eq!(condition_thresholds(&r), vec![11.0, 5.0]);
    }

    #[test]
    fn ties_do_not_count() {
        let r = region(vec![vec![12.0, 5.0], vec![10.0, 5.0]]);
        let flags = exceedance_flags(&r, &[11.0, 5.0]).unwrap();
        assert_eq!(flags[0], vec![true, false]);
        assert_eq!(exceedance_flags(&r, &[12.0, 5.0]).unwrap()[0], vec![false, false]);
        assert!(matches!(exceedance_flags(&r, &[1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn two_conditions_above_mean_score_two() {
        // asthma and obesity above the mean, the other four below it
        let r = region(vec![
            vec![20.0, 12.0, 10.0, 5.0, 45.0, 3.0],
            vec![30.0, 10.0, 20.0, 9.0, 35.0, 6.0],
        ]);
        let a = affinity_scores(&r);
        assert_eq!(a.scores, vec![2, 4]);
        assert_eq!(a.flags[0], vec![false, true, false, false, true, false]);
    }

    #[test]
    fn identical_tracts_score_zero() {
        let r = region(vec![vec![3.0; 6]; 5]);
        let a = affinity_scores(&r);
        assert!(a.scores.iter().all(|&s| s == 0));
        assert_eq!(a.share_max, 0.0);
    }

    #[test]
    fn describe_small() {
        let s = summarize("x", &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.sd, s.min, s.max, s.n), (2.0, 1.0, 1.0, 3.0, 3));
        assert!(summarize("x", &[1.0]).is_err());
    }

    #[test]
    fn correlation_exact_cases() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let y = vec![1.0, 3.0, 2.0, 4.0];
        let names = vec!["x".to_string(), "neg".to_string(), "y".to_string()];
        let m = correlation_of_columns(&names, &[x, neg, y]).unwrap();
        assert_eq!(m.r[0][0], 1.0);
        assert_eq!(m.r[0][1], -1.0);
        // deviations x: (-1.5,-0.5,0.5,1.5), y: (-1.5,0.5,-0.5,1.5)
        // sxy = 2.25-0.25-0.25+2.25 = 4, sxx = syy = 5
        assert!((m.r[0][2] - 0.8).abs() < 1e-15);
        assert_eq!(m.r[2][0], m.r[0][2]);
    }

    #[test]
    fn zero_variance_column_is_named() {
        let names = vec!["a".to_string(), "flat".to_string()];
        let err = correlation_of_columns(&names, &[vec![1.0, 2.0, 3.0], vec![4.0; 3]]).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(ref n) if n == "flat"));
    }
}
