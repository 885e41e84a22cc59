//! Run configuration: a TOML file with flat sections.

use std::path::{Path, PathBuf};

use geoaffinity::ingest::{ColumnSpec, MissingPolicy, TableSchema, ValueKind};
use geoaffinity::synth::{HotspotSpec, LatticeSpec, Scenario};
use geoaffinity::vars;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<InputConfig>,
    pub synth: Option<SynthConfig>,
    /// Condition name -> source column, in report order.
    #[serde(default)]
    pub conditions: IndexMap<String, ColumnMapping>,
    /// Indicator name -> source column, in report order.
    #[serde(default)]
    pub indicators: IndexMap<String, ColumnMapping>,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub regression: RegressionConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub prevalence: PathBuf,
    pub indicators: PathBuf,
    pub geometry: PathBuf,
    #[serde(default = "default_id")]
    pub id_column: String,
    #[serde(default = "default_id")]
    pub id_property: String,
    #[serde(default)]
    pub missing_policy: PolicyName,
    /// Reject out-of-range percentages instead of warning.
    #[serde(default)]
    pub strict_ranges: bool,
}

fn default_id() -> String {
    "GEOID".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    #[default]
    Drop,
    Strict,
}

impl From<PolicyName> for MissingPolicy {
    fn from(p: PolicyName) -> Self {
        match p {
            PolicyName::Drop => MissingPolicy::DropIncomplete,
            PolicyName::Strict => MissingPolicy::Strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "one")]
    pub cell_size: f64,
    pub rho: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "six")]
    pub conditions: usize,
    #[serde(default = "one")]
    pub noise_sd: f64,
    pub hotspot_row: Option<usize>,
    pub hotspot_col: Option<usize>,
    #[serde(default = "two")]
    pub hotspot_radius: usize,
    #[serde(default = "three")]
    pub hotspot_delta_sd: f64,
}

fn one() -> f64 {
    1.0
}
fn three() -> f64 {
    3.0
}
fn two() -> usize {
    2
}
fn six() -> usize {
    6
}

impl SynthConfig {
    pub fn scenario(&self, seed: u64) -> Result<Scenario, CliError> {
        let hotspot = match (self.hotspot_row, self.hotspot_col) {
            (Some(row), Some(col)) => Some(HotspotSpec {
                row,
                col,
                radius_steps: self.hotspot_radius,
                delta_sd: self.hotspot_delta_sd,
            }),
            (None, None) => None,
            _ => return Err(CliError::data("synth: set both hotspot_row and hotspot_col, or neither")),
        };
        Ok(Scenario {
            lattice: LatticeSpec { rows: self.rows, cols: self.cols, cell_size: self.cell_size },
            rho: self.rho,
            sigma: self.sigma,
            conditions: self.conditions,
            noise_sd: self.noise_sd,
            hotspot,
            seed,
        })
    }
}

/// Either `name = "COLUMN"` or `name = { column = "COLUMN", kind = "count" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnMapping {
    Column(String),
    Detailed { column: String, kind: Option<ValueKind> },
}

impl ColumnMapping {
    fn spec(&self, name: &str) -> ColumnSpec {
        let (source, kind) = match self {
            ColumnMapping::Column(c) => (c.clone(), None),
            ColumnMapping::Detailed { column, kind } => (column.clone(), *kind),
        };
        ColumnSpec { source, name: name.to_string(), kind: kind.unwrap_or_else(|| ValueKind::infer(name)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsKind {
    Queen,
    Rook,
    Knn,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    /// Weights for Moran's I.
    #[serde(default = "queen")]
    pub moran: WeightsKind,
    #[serde(default = "yes")]
    pub moran_row_standardize: bool,
    /// Neighbours per tract when a `knn` kind is chosen.
    #[serde(default = "four")]
    pub k: usize,
    /// Band for Moran's I when `moran = "distance"`; defaults to the largest
    /// nearest-neighbour distance.
    pub moran_distance: Option<f64>,
    /// Weights for Gi*; self-inclusion is always applied.
    #[serde(default = "distance")]
    pub gi: WeightsKind,
    pub gi_distance: Option<f64>,
    /// Contiguity snap tolerance; defaults to 1e-9 of the extent diagonal.
    pub snap_tolerance: Option<f64>,
}

fn queen() -> WeightsKind {
    WeightsKind::Queen
}
fn distance() -> WeightsKind {
    WeightsKind::Distance
}
fn yes() -> bool {
    true
}
fn four() -> usize {
    4
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig {
            moran: WeightsKind::Queen,
            moran_row_standardize: true,
            k: 4,
            moran_distance: None,
            gi: WeightsKind::Distance,
            gi_distance: None,
            snap_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    /// Permutations for Moran's I; 0 disables the permutation test.
    #[serde(default = "nine_nine_nine")]
    pub n_perm: usize,
    pub seed: Option<u64>,
    #[serde(default = "default_alphas")]
    pub alphas: [f64; 3],
}

fn nine_nine_nine() -> usize {
    999
}
fn default_alphas() -> [f64; 3] {
    [0.10, 0.05, 0.01]
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { n_perm: 999, seed: None, alphas: default_alphas() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Irls,
    Ols,
    OlsHc1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionConfig {
    /// Subset of `model1`, `model2`; empty skips regression.
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    /// Estimator shown as primary in `table3`; all three are always reported.
    #[serde(default = "irls")]
    pub method: MethodName,
    #[serde(default = "huber")]
    pub huber_c: f64,
    #[serde(default = "bisquare")]
    pub bisquare_c: f64,
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
}

fn default_models() -> Vec<String> {
    vec!["model1".into(), "model2".into()]
}
fn irls() -> MethodName {
    MethodName::Irls
}
fn huber() -> f64 {
    1.345
}
fn bisquare() -> f64 {
    4.685
}
fn tol() -> f64 {
    1e-6
}
fn max_iter() -> usize {
    50
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            models: default_models(),
            method: MethodName::Irls,
            huber_c: huber(),
            bisquare_c: bisquare(),
            tol: tol(),
            max_iter: max_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative to the config file; `--out` overrides it.
    pub dir: Option<PathBuf>,
    /// Quantile classes for the affinity choropleth.
    #[serde(default = "five")]
    pub bins: usize,
    #[serde(default)]
    pub weights_json: bool,
}

fn five() -> usize {
    5
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, bins: 5, weights_json: false }
    }
}

/// A parsed config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::data(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.input, &self.synth) {
            (Some(_), Some(_)) => return Err(CliError::data("config: give exactly one of [input] and [synth], not both")),
            (None, None) => return Err(CliError::data("config: one of [input] or [synth] is required")),
            _ => {}
        }
        if !(1..=9).contains(&self.output.bins) {
            return Err(CliError::data("config: output.bins must be between 1 and 9"));
        }
        for m in &self.regression.models {
            if m != "model1" && m != "model2" {
                return Err(CliError::data(format!("config: unknown model `{m}` (expected model1 or model2)")));
            }
        }
        if (self.weights.moran == WeightsKind::Knn || self.weights.gi == WeightsKind::Knn) && self.weights.k == 0 {
            return Err(CliError::data("config: weights.k must be >= 1"));
        }
        Ok(())
    }

    /// Seed is mandatory when permutations run or data are synthesized.
    pub fn require_seed(&self) -> Result<u64, CliError> {
        match self.inference.seed {
            Some(s) => Ok(s),
            None if self.synth.is_some() || self.inference.n_perm > 0 => Err(CliError::data(
                "config: inference.seed is required for permutations and synthesis (or pass --seed)",
            )),
            None => Ok(0),
        }
    }

    pub fn prevalence_schema(&self, id_column: &str) -> TableSchema {
        let columns = if self.conditions.is_empty() {
            vars::CONDITIONS.iter().map(|n| ColumnMapping::Column(n.to_string()).spec(n)).collect()
        } else {
            self.conditions
                .iter()
                .map(|(n, m)| {
                    let mut spec = m.spec(n);
                    spec.kind = ValueKind::Percent;
                    spec
                })
                .collect()
        };
        TableSchema { id_column: id_column.to_string(), columns }
    }

    pub fn indicator_schema(&self, id_column: &str) -> TableSchema {
        let columns = if self.indicators.is_empty() {
            vars::INDICATORS.iter().map(|n| ColumnMapping::Column(n.to_string()).spec(n)).collect()
        } else {
            self.indicators.iter().map(|(n, m)| m.spec(n)).collect()
        };
        TableSchema { id_column: id_column.to_string(), columns }
    }

    /// SHA-256 over the canonical JSON form of the config, with the output
    /// directory removed so that relocating outputs does not change it.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = None;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    let config = RunConfig::parse(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base_dir })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_synth() {
        let c = RunConfig::parse("[synth]\nrows = 4\ncols = 4\nrho = 0.5\n[inference]\nseed = 7\n").unwrap();
        assert_eq!(c.require_seed().unwrap(), 7);
        assert_eq!(c.weights.moran, WeightsKind::Queen);
        assert_eq!(c.inference.n_perm, 999);
    }

    #[test]
    fn rejects_both_or_neither_source() {
        assert!(RunConfig::parse("[inference]\nseed = 1\n").is_err());
        let both = "[synth]\nrows = 2\ncols = 2\nrho = 0\n[input]\nprevalence = \"a\"\nindicators = \"b\"\ngeometry = \"c\"\n";
        assert!(RunConfig::parse(both).is_err());
    }

    #[test]
    fn seed_required_for_synth() {
        let c = RunConfig::parse("[synth]\nrows = 4\ncols = 4\nrho = 0.5\n").unwrap();
        assert!(c.require_seed().is_err());
    }

    #[test]
    fn column_mappings_keep_order() {
        let text = "[input]\nprevalence = \"p.csv\"\nindicators = \"i.csv\"\ngeometry = \"g.json\"\n\
                    [conditions]\nzeta = \"Z\"\nalpha = \"A\"\n\
                    [indicators]\npop = { column = \"POP\", kind = \"count\" }\n";
        let c = RunConfig::parse(text).unwrap();
        let s = c.prevalence_schema("GEOID");
        assert_eq!(s.columns[0].name, "zeta");
        assert_eq!(s.columns[1].source, "A");
        assert_eq!(c.indicator_schema("GEOID").columns[0].kind, ValueKind::Count);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::parse("[synth]\nrows = 4\ncols = 4\nrho = 0.5\n[output]\ndir = \"x\"\n").unwrap();
        let b = RunConfig::parse("[synth]\nrows = 4\ncols = 4\nrho = 0.5\n[output]\ndir = \"y\"\n").unwrap();
        let c = RunConfig::parse("[synth]\nrows = 4\ncols = 4\nrho = 0.6\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
