//! Shape of `report.json`.

use geoaffinity::affinity::{CorrelationMatrix, DescriptiveStats};
use geoaffinity::ingest::ValidationReport;
use geoaffinity::regression::{Diagnostics, DesignSpec, ModelFits, RobustFit};
use geoaffinity::spatial::MoranResult;
use geoaffinity::weights::WeightsMatrix;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::MethodName;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub metadata: Metadata,
    pub validation: ValidationReport,
    /// Conditions, affinity, indicators.
    pub table1: DescriptiveStats,
    /// Pearson correlations among the conditions and affinity.
    pub table2: CorrelationMatrix,
    /// Affinity against each indicator.
    pub affinity_correlations: Vec<CorrelationEntry>,
    pub affinity: AffinitySummary,
    pub moran: MoranSection,
    pub hotspots: HotspotSection,
    pub table3: Table3,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub rng: String,
    pub source: String,
    pub n_tracts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationEntry {
    pub variable: String,
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AffinitySummary {
    pub conditions: Vec<String>,
    /// Regional mean per condition; a tract counts when strictly above it.
    pub thresholds: Vec<f64>,
    /// Tracts at score 0, 1, ..., K.
    pub score_counts: Vec<usize>,
    pub share_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightsSummary {
    pub kind: String,
    pub standardization: String,
    pub includes_self: bool,
    pub distance: Option<f64>,
    pub w_sum: f64,
    pub mean_neighbors: f64,
    pub islands: usize,
}

impl WeightsSummary {
    pub fn new(kind: &str, w: &WeightsMatrix, distance: Option<f64>) -> Self {
        let links: usize = w.neighbors.iter().enumerate().map(|(i, r)| r.iter().filter(|&&(j, _)| j != i).count()).sum();
        WeightsSummary {
            kind: kind.to_string(),
            standardization: format!("{:?}", w.standardization).to_lowercase(),
            includes_self: w.includes_self,
            distance,
            w_sum: w.w_sum,
            mean_neighbors: links as f64 / w.n as f64,
            islands: w.islands.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MoranSection {
    pub variable: String,
    pub weights: WeightsSummary,
    pub result: MoranResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct HotspotSection {
    pub variable: String,
    pub weights: WeightsSummary,
    pub alphas: [f64; 3],
    pub correction: String,
    /// FDR-corrected category counts.
    pub counts: Map<String, Value>,
    /// Uncorrected category counts.
    pub counts_raw: Map<String, Value>,
}

/// Per-term inference without the per-observation vectors.
#[derive(Debug, Clone, Serialize)]
pub struct CoefTable {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub scale: f64,
    pub iterations: usize,
    pub converged: bool,
    pub df_resid: usize,
}

impl From<&RobustFit> for CoefTable {
    fn from(f: &RobustFit) -> Self {
        CoefTable {
            terms: f.terms.clone(),
            coefficients: f.coefficients.clone(),
            std_errors: f.std_errors.clone(),
            p_values: f.p_values.clone(),
            ci_low: f.ci_low.clone(),
            ci_high: f.ci_high.clone(),
            scale: f.scale,
            iterations: f.iterations,
            converged: f.converged,
            df_resid: f.df_resid,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelEntry {
    pub name: String,
    pub response: String,
    pub predictors: Vec<String>,
    pub controls: Vec<String>,
    pub n: Option<usize>,
    pub primary: Option<CoefTable>,
    pub irls: Option<CoefTable>,
    pub ols: Option<CoefTable>,
    pub ols_hc1: Option<CoefTable>,
    pub diagnostics: Option<Diagnostics>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

impl ModelEntry {
    pub fn new(spec: &DesignSpec, fit: geoaffinity::Result<ModelFits>, primary: MethodName) -> Self {
        let mut entry = ModelEntry {
            name: spec.name.clone(),
            response: spec.response.clone(),
            predictors: spec.predictors.clone(),
            controls: spec.controls.clone(),
            n: None,
            primary: None,
            irls: None,
            ols: None,
            ols_hc1: None,
            diagnostics: None,
            error: None,
            warnings: Vec::new(),
        };
        match fit {
            Ok(f) => {
                let chosen = match primary {
                    MethodName::Irls => &f.irls,
                    MethodName::Ols => &f.ols,
                    MethodName::OlsHc1 => &f.ols_hc1,
                };
                entry.primary = Some(chosen.into());
                entry.n = Some(f.n);
                entry.irls = Some((&f.irls).into());
                entry.ols = Some((&f.ols).into());
                entry.ols_hc1 = Some((&f.ols_hc1).into());
                entry.warnings = f.irls.warnings.clone();
                entry.diagnostics = Some(f.diagnostics);
            }
            Err(e) => entry.error = Some(e.to_string()),
        }
        entry
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table3 {
    pub primary: MethodName,
    pub models: Vec<ModelEntry>,
}
