//! Deterministic imputation followed by a single regression.

use serde::{Deserialize, Serialize};

use super::regression::{fit_rows, Regression};
use crate::domain::{MaskedDataset, Pattern, PredictiveDistribution, Query};
use crate::error::{Error, Result};
use crate::estimators::{em_mvn, EmOptions, GaussianJoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItrFill {
    Zero,
    #[serde(alias = "mean")]
    UnconditionalMean,
    #[serde(alias = "cmean")]
    ConditionalMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItrLearner {
    Linear,
    #[serde(alias = "interact")]
    LinearWithIndicatorInteractions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "fill", rename_all = "snake_case")]
pub enum FillModel {
    Zero,
    Mean { means: Vec<f64> },
    ConditionalMean { joint: GaussianJoint },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ItrModel {
    pub p: usize,
    pub learner: ItrLearner,
    pub missable: Vec<usize>,
    pub fill: FillModel,
    pub outcome: Regression,
}

impl ItrModel {
    fn filled(&self, pattern: &Pattern, observed: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.p];
        for &(j, v) in observed {
            x[j] = v;
        }
        let missing = pattern.missing();
        if missing.is_empty() {
            return Ok(x);
        }
        match &self.fill {
            FillModel::Zero => {}
            FillModel::Mean { means } => {
                for &j in &missing {
                    x[j] = means[j];
                }
            }
            FillModel::ConditionalMean { joint } => {
                let (m, _) = joint.conditional(&missing, observed)?;
                for (k, &j) in missing.iter().enumerate() {
                    x[j] = m[k];
                }
            }
        }
        Ok(x)
    }

    fn design(&self, x: &[f64], pattern: &Pattern) -> Vec<f64> {
        let mut row = vec![1.0];
        row.extend_from_slice(x);
        if self.learner == ItrLearner::LinearWithIndicatorInteractions {
            for &j in &self.missable {
                row.push(pattern.is_missing(j) as u8 as f64);
            }
            for &j in &self.missable {
                let mj = pattern.is_missing(j) as u8 as f64;
                row.extend(x.iter().map(|v| mj * v));
            }
        }
        row
    }

    pub fn supports(&self, pattern: &Pattern) -> bool {
        pattern.len() == self.p
            && (self.learner == ItrLearner::Linear || pattern.missing().iter().all(|j| self.missable.contains(j)))
    }

    pub fn predict(&self, query: &Query) -> Result<PredictiveDistribution> {
        if !self.supports(&query.pattern) {
            return Err(Error::UnsupportedPattern {
                pattern: query.pattern.to_string(),
                reason: "a missing column has no indicator in the learner".into(),
            });
        }
        let x = self.filled(&query.pattern, &query.observed)?;
        self.outcome.predict(&self.design(&x, &query.pattern))
    }
}

pub(crate) fn train_itr(ds: &MaskedDataset, fill: ItrFill, learner: ItrLearner) -> Result<ItrModel> {
    let n = ds.n();
    let p = ds.p();
    let missable: Vec<usize> = (0..p).filter(|&j| ds.x().col_observed_count(j) < n).collect();
    let fill_model = match fill {
        ItrFill::Zero => FillModel::Zero,
        ItrFill::UnconditionalMean => {
            let means = (0..p)
                .map(|j| {
                    let vals: Vec<f64> = (0..n).filter_map(|i| ds.x().opt(i, j)).collect();
                    if vals.is_empty() {
                        Err(Error::Training(format!("column {j} is never observed")))
                    } else {
                        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            FillModel::Mean { means }
        }
        ItrFill::ConditionalMean => FillModel::ConditionalMean { joint: em_mvn(ds.x(), EmOptions::default())?.joint },
    };
    let mut model = ItrModel {
        p,
        learner,
        missable,
        fill: fill_model,
        outcome: Regression { kept: vec![], coef: vec![], resid_var: 0.0, binary: false, n_used: 0 },
    };
    let rows = super::usable_rows(ds);
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for &i in &rows {
        let q = ds.query(i);
        let x = model.filled(&q.pattern, &q.observed)?;
        xs.push(model.design(&x, &q.pattern));
        ys.push(ds.y_at(i)?);
    }
    model.outcome = fit_rows(&xs, &ys, ds.outcome_is_binary())?.summary();
    Ok(model)
}
