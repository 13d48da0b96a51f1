//! Training procedures for incomplete predictors. Each produces a
//! [`TrainedForecaster`] that declares its target and the patterns it supports.

mod itr;
mod mi;
mod mle;
mod pattern;
mod regression;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Forecaster, MaskedDataset, Pattern, PredictiveDistribution, Query, Target};
use crate::error::{Error, Result};

pub use itr::{ItrFill, ItrLearner, ItrModel};
pub use mi::MiModel;
pub use mle::MleModel;
pub use pattern::{PatternModel, SubModel};
pub use regression::Regression;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum ProcedureKind {
    #[default]
    PS,
    CCS,
    CCA,
    MI,
    MIMI,
    #[serde(rename = "MLE-M", alias = "MLE_M")]
    MleM,
    #[serde(rename = "MLEMI-M", alias = "MLEMI_M")]
    MlemiM,
    ITR,
}

impl ProcedureKind {
    pub const ALL: [ProcedureKind; 8] = [
        ProcedureKind::PS,
        ProcedureKind::CCS,
        ProcedureKind::CCA,
        ProcedureKind::MI,
        ProcedureKind::MIMI,
        ProcedureKind::MleM,
        ProcedureKind::MlemiM,
        ProcedureKind::ITR,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProcedureKind::PS => "PS",
            ProcedureKind::CCS => "CCS",
            ProcedureKind::CCA => "CCA",
            ProcedureKind::MI => "MI",
            ProcedureKind::MIMI => "MIMI",
            ProcedureKind::MleM => "MLE-M",
            ProcedureKind::MlemiM => "MLEMI-M",
            ProcedureKind::ITR => "ITR",
        }
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProcedureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        ProcedureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown procedure {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcedureConfig {
    pub name: ProcedureKind,
    /// Completed datasets for MI and MIMI.
    pub m_imputations: usize,
    /// Draws for Monte Carlo marginalisation at deployment.
    pub mc_draws: usize,
    /// Drop rows with a missing outcome before any fitting.
    pub restrict_to_observed_y: bool,
    /// Chained-equation cycles; `None` picks 5, or 1 with a single incomplete column.
    pub mi_cycles: Option<usize>,
    /// Indicator-by-predictor interactions in MIMI.
    pub mimi_interactions: bool,
    /// MLEMI-M with indicators as Gaussian covariates instead of strata.
    pub mlemi_covariate: bool,
    /// MLE-M marginalises by Monte Carlo instead of in closed form.
    pub mle_monte_carlo: bool,
    pub itr_fill: ItrFill,
    pub itr_learner: ItrLearner,
    pub seed: u64,
    /// Name used in reports; defaults to the procedure name.
    pub label: Option<String>,
}

impl Default for ProcedureConfig {
    fn default() -> Self {
        ProcedureConfig {
            name: ProcedureKind::PS,
            m_imputations: 20,
            mc_draws: 2000,
            restrict_to_observed_y: true,
            mi_cycles: None,
            mimi_interactions: true,
            mlemi_covariate: false,
            mle_monte_carlo: false,
            itr_fill: ItrFill::ConditionalMean,
            itr_learner: ItrLearner::LinearWithIndicatorInteractions,
            seed: 0,
            label: None,
        }
    }
}

impl ProcedureConfig {
    pub fn new(name: ProcedureKind) -> Self {
        ProcedureConfig { name, ..Default::default() }
    }

    pub fn display_name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.name.to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.name, ProcedureKind::MI | ProcedureKind::MIMI) && self.m_imputations < 2 {
            return Err(Error::Config("m_imputations must be at least 2".into()));
        }
        if self.mc_draws < 100 {
            return Err(Error::Config("mc_draws must be at least 100".into()));
        }
        if self.mi_cycles == Some(0) {
            return Err(Error::Config("mi_cycles must be positive".into()));
        }
        Ok(())
    }

    pub fn target(&self) -> Option<Target> {
        match self.name {
            ProcedureKind::PS | ProcedureKind::CCA | ProcedureKind::MIMI | ProcedureKind::MlemiM => {
                Some(Target::MC)
            }
            ProcedureKind::MI | ProcedureKind::MleM => Some(Target::MU),
            ProcedureKind::CCS => None,
            ProcedureKind::ITR => match self.itr_learner {
                ItrLearner::LinearWithIndicatorInteractions => Some(Target::MC),
                ItrLearner::Linear => None,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Pattern(PatternModel),
    Imputation(MiModel),
    Likelihood(MleModel),
    ImputeThenRegress(ItrModel),
}

/// A trained procedure together with what is needed to rerun it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedForecaster {
    pub format_version: u32,
    pub config: ProcedureConfig,
    pub column_names: Vec<String>,
    pub outcome_name: String,
    pub model: Model,
}

impl TrainedForecaster {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: TrainedForecaster = serde_json::from_str(s)?;
        if f.format_version != FORMAT_VERSION {
            return Err(Error::Input(format!(
                "forecaster format {} is not supported (expected {FORMAT_VERSION})",
                f.format_version
            )));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Forecaster for TrainedForecaster {
    fn name(&self) -> String {
        self.config.display_name()
    }

    fn target(&self) -> Option<Target> {
        self.config.target()
    }

    fn supports(&self, pattern: &Pattern) -> bool {
        pattern.len() == self.column_names.len()
            && match &self.model {
                Model::Pattern(m) => m.supports(pattern),
                Model::Imputation(m) => m.supports(pattern),
                Model::Likelihood(m) => m.supports(pattern),
                Model::ImputeThenRegress(m) => m.supports(pattern),
            }
    }

    fn predict(&self, query: &Query) -> Result<PredictiveDistribution> {
        let p = self.column_names.len();
        if query.pattern.len() != p {
            return Err(Error::Contract(format!("query has {} predictors, model has {p}", query.pattern.len())));
        }
        if query.observed.iter().any(|&(j, _)| j >= p || query.pattern.is_missing(j))
            || query.observed.len() != p - query.pattern.n_missing()
        {
            return Err(Error::Contract("query values disagree with its pattern".into()));
        }
        match &self.model {
            Model::Pattern(m) => m.predict(query),
            Model::Imputation(m) => m.predict(query),
            Model::Likelihood(m) => m.predict(query),
            Model::ImputeThenRegress(m) => m.predict(query),
        }
    }
}

/// Rows whose outcome is usable for fitting the outcome model.
pub(crate) fn usable_rows(ds: &MaskedDataset) -> Vec<usize> {
    ds.outcome_observed_rows()
}

/// Train the configured procedure on `ds`.
pub fn train(cfg: &ProcedureConfig, ds: &MaskedDataset) -> Result<TrainedForecaster> {
    cfg.validate()?;
    let data = if cfg.restrict_to_observed_y {
        let rows = ds.outcome_observed_rows();
        if rows.is_empty() {
            return Err(Error::Training("no rows with an observed outcome".into()));
        }
        ds.select_rows(&rows)
    } else {
        ds.clone()
    };
    let model = match cfg.name {
        ProcedureKind::PS => Model::Pattern(pattern::train_ps(&data)?),
        ProcedureKind::CCS => Model::Pattern(pattern::train_ccs(&data)?),
        ProcedureKind::CCA => Model::Pattern(pattern::train_cca(&data)?),
        ProcedureKind::MI => Model::Imputation(mi::train_mi(&data, cfg, false)?),
        ProcedureKind::MIMI => Model::Imputation(mi::train_mi(&data, cfg, true)?),
        ProcedureKind::MleM => Model::Likelihood(mle::train_mle(&data, cfg, false)?),
        ProcedureKind::MlemiM => Model::Likelihood(mle::train_mle(&data, cfg, true)?),
        ProcedureKind::ITR => Model::ImputeThenRegress(itr::train_itr(&data, cfg.itr_fill, cfg.itr_learner)?),
    };
    Ok(TrainedForecaster {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        column_names: ds.column_names().to_vec(),
        outcome_name: ds.outcome_name().to_string(),
        model,
    })
}

/// Predict every row of `ds` with its own pattern.
pub fn predict_dataset(f: &dyn Forecaster, ds: &MaskedDataset) -> Result<Vec<PredictiveDistribution>> {
    crate::exec::map_range(ds.n(), |i| f.predict(&ds.query(i))).into_iter().collect()
}

#[cfg(test)]
mod tests;
