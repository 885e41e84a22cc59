use serde::{Deserialize, Serialize};

use super::diagnostics::{linktest, vif, Diagnostics};
use super::irls::{irls_m_fit, IrlsConfig};
use super::ols::{ols_fit, ols_hc1_fit};
use super::{Design, RobustFit};
use crate::affinity::{affinity_scores, AFFINITY};
use crate::error::{Error, Result};
use crate::ingest::StudyRegion;
use crate::vars;

/// Response, predictors of interest and controls; an intercept is always added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub name: String,
    pub response: String,
    pub predictors: Vec<String>,
    pub controls: Vec<String>,
}

impl DesignSpec {
    /// Affinity on poverty, unemployment and crime, with demographic controls.
    pub fn model1() -> Self {
        DesignSpec {
            name: "model1".into(),
            response: AFFINITY.into(),
            predictors: [vars::POVERTY, vars::UNEMPLOYMENT, vars::CRIME].map(String::from).to_vec(),
            controls: [vars::MALE, vars::AGE67, vars::POPULATION].map(String::from).to_vec(),
        }
    }

    /// Model 1 plus smoking.
    pub fn model2() -> Self {
        let mut spec = Self::model1();
        spec.name = "model2".into();
        spec.predictors.push(vars::SMOKING.into());
        spec
    }

    pub fn terms(&self) -> Vec<String> {
        self.predictors.iter().chain(&self.controls).cloned().collect()
    }

    fn validate(&self, region: &StudyRegion) -> Result<()> {
        let terms = self.terms();
        for (i, t) in terms.iter().enumerate() {
            if terms[..i].contains(t) || *t == self.response {
                return Err(Error::InvalidArgument(format!("`{t}` appears twice in {}", self.name)));
            }
        }
        for name in std::iter::once(&self.response).chain(&terms) {
            if name != AFFINITY && region.column(name).is_none() {
                return Err(Error::UnknownVariable(name.clone()));
            }
        }
        Ok(())
    }
}

/// All three estimators for one model, plus diagnostics on the M-fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFits {
    pub n: usize,
    /// The primary fit.
    pub irls: RobustFit,
    pub ols: RobustFit,
    pub ols_hc1: RobustFit,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub spec: DesignSpec,
    pub fits: Option<ModelFits>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinityModels {
    pub model1: ModelReport,
    pub model2: ModelReport,
}

fn response_column(region: &StudyRegion, name: &str) -> Result<Vec<f64>> {
    if name == AFFINITY {
        Ok(affinity_scores(region).scores_f64())
    } else {
        region.require_column(name)
    }
}

/// Fits one specification with all three estimators.
pub fn fit_model(region: &StudyRegion, spec: &DesignSpec, config: &IrlsConfig) -> Result<ModelFits> {
    spec.validate(region)?;
    let y = response_column(region, &spec.response)?;
    let names = spec.terms();
    let columns = names.iter().map(|n| region.require_column(n)).collect::<Result<Vec<_>>>()?;
    let design = Design::with_intercept(&names, &columns)?;
    let ols = ols_fit(&design, &y)?;
    let ols_hc1 = ols_hc1_fit(&design, &y)?;
    let irls = irls_m_fit(&design, &y, config)?;
    let diagnostics = Diagnostics { vif: vif(&names, &columns)?, linktest: linktest(&design, &y, &irls)? };
    Ok(ModelFits { n: region.n(), irls, ols, ols_hc1, diagnostics })
}

fn report(region: &StudyRegion, spec: DesignSpec, config: &IrlsConfig) -> ModelReport {
    match fit_model(region, &spec, config) {
        Ok(fits) => ModelReport { spec, fits: Some(fits), error: None },
        Err(e) => ModelReport { spec, fits: None, error: Some(e.to_string()) },
    }
}

/// Model 1 and Model 2. A missing variable fails the whole call; numerical
/// failures (e.g. a rank-deficient design) are reported per model.
pub fn fit_affinity_models(region: &StudyRegion, config: &IrlsConfig) -> Result<AffinityModels> {
    let (m1, m2) = (DesignSpec::model1(), DesignSpec::model2());
    m1.validate(region)?;
    m2.validate(region)?;
    let (model1, model2) = rayon::join(|| report(region, m1, config), || report(region, m2, config));
    Ok(AffinityModels { model1, model2 })
}
