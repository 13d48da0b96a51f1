//! Multiple imputation by chained equations, with or without missingness
//! indicators in the outcome model.
//!
//! Training imputes every incomplete column (predictors and, when rows with a
//! missing outcome are kept, the outcome) from all other columns using
//! posterior draws. Deployment cannot use the outcome, so each completed
//! dataset also carries imputation models refitted without it.

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::regression::{fit_rows, Regression};
use super::ProcedureConfig;
use crate::domain::{MaskedDataset, Pattern, PredictiveDistribution, Query};
use crate::error::{Error, Result};
use crate::seed;

const BURN_IN: usize = 25;
const FIXED_POINT_TOL: f64 = 1e-13;
const FIXED_POINT_MAX_ITER: usize = 1000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Imputation {
    pub outcome: Regression,
    /// Deployment imputation model per predictor, `None` where not fitted.
    pub imputers: Vec<Option<Regression>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MiModel {
    pub indicators: bool,
    pub interactions: bool,
    pub p: usize,
    /// Predictors with at least one missing training value.
    pub missable: Vec<usize>,
    pub binary_cols: Vec<bool>,
    pub outcome_binary: bool,
    pub mc_draws: usize,
    pub seed: u64,
    pub imputations: Vec<Imputation>,
}

fn column_is_binary(ds: &MaskedDataset, j: usize) -> bool {
    let mut any = false;
    for i in 0..ds.n() {
        if let Some(v) = ds.x().opt(i, j) {
            if v != 0.0 && v != 1.0 {
                return false;
            }
            any = true;
        }
    }
    any
}

impl MiModel {
    fn outcome_row(&self, x: &[f64], m: &[bool], out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        out.extend_from_slice(x);
        if self.indicators {
            for &j in &self.missable {
                out.push(m[j] as u8 as f64);
            }
            if self.interactions {
                for &j in &self.missable {
                    let mj = m[j] as u8 as f64;
                    out.extend(x.iter().map(|v| mj * v));
                }
            }
        }
    }

    fn imputer_row(&self, target: usize, x: &[f64], m: &[bool], out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        out.extend(x.iter().enumerate().filter(|&(k, _)| k != target).map(|(_, v)| *v));
        if self.indicators {
            for &j in &self.missable {
                out.push(m[j] as u8 as f64);
            }
            if self.interactions {
                for &j in &self.missable {
                    let mj = m[j] as u8 as f64;
                    out.extend(x.iter().enumerate().filter(|&(k, _)| k != target).map(|(_, v)| mj * v));
                }
            }
        }
    }

    pub fn supports(&self, pattern: &Pattern) -> bool {
        pattern.len() == self.p
            && pattern.missing().iter().all(|&j| self.imputations.iter().all(|imp| imp.imputers[j].is_some()))
    }

    fn query_seed(&self, k: usize, query: &Query) -> u64 {
        let mut parts = vec![seed::label("deploy"), k as u64];
        parts.extend(query.pattern.bits().iter().map(|&b| b as u64));
        parts.extend(query.observed.iter().map(|&(_, v)| v.to_bits()));
        seed::derive(self.seed, &parts)
    }

    /// Mean outcome for one completed-data model, marginalising the missing
    /// predictors over the deployment imputation models.
    fn predict_one(&self, k: usize, imp: &Imputation, query: &Query) -> Result<f64> {
        let m = query.pattern.bits();
        let missing = query.pattern.missing();
        let mut x = vec![0.0; self.p];
        for &(j, v) in &query.observed {
            x[j] = v;
        }
        let mut buf = Vec::new();
        if missing.is_empty() {
            self.outcome_row(&x, m, &mut buf);
            return Ok(imp.outcome.mean(&buf));
        }
        let imputers: Vec<&Regression> = missing
            .iter()
            .map(|&j| {
                imp.imputers[j].as_ref().ok_or_else(|| Error::UnsupportedPattern {
                    pattern: query.pattern.to_string(),
                    reason: format!("no deployment imputation model for column {j}"),
                })
            })
            .collect::<Result<_>>()?;
        // Gauss-Seidel on the conditional means; exact for linear imputers.
        for _ in 0..FIXED_POINT_MAX_ITER {
            let mut delta: f64 = 0.0;
            for (&j, r) in missing.iter().zip(&imputers) {
                self.imputer_row(j, &x, m, &mut buf);
                let v = r.mean(&buf);
                delta = delta.max((v - x[j]).abs());
                x[j] = v;
            }
            if delta <= FIXED_POINT_TOL * (1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
                break;
            }
        }
        let linear = !self.outcome_binary && imputers.iter().all(|r| !r.binary);
        if linear {
            self.outcome_row(&x, m, &mut buf);
            return Ok(imp.outcome.mean(&buf));
        }
        let mut rng = seed::rng(self.query_seed(k, query));
        let mut total = 0.0;
        for t in 0..(BURN_IN + self.mc_draws) {
            for (&j, r) in missing.iter().zip(&imputers) {
                self.imputer_row(j, &x, m, &mut buf);
                x[j] = r.sample(&buf, &mut rng);
            }
            if t >= BURN_IN {
                self.outcome_row(&x, m, &mut buf);
                total += imp.outcome.mean(&buf);
            }
        }
        Ok(total / self.mc_draws as f64)
    }

    pub fn predict(&self, query: &Query) -> Result<PredictiveDistribution> {
        if !self.supports(&query.pattern) {
            return Err(Error::UnsupportedPattern {
                pattern: query.pattern.to_string(),
                reason: "a missing column was never missing in training".into(),
            });
        }
        let means = self
            .imputations
            .iter()
            .enumerate()
            .map(|(k, imp)| self.predict_one(k, imp, query))
            .collect::<Result<Vec<f64>>>()?;
        let mm = means.len() as f64;
        let pooled = means.iter().sum::<f64>() / mm;
        if self.outcome_binary {
            return PredictiveDistribution::bernoulli(pooled.clamp(0.0, 1.0));
        }
        let within = self.imputations.iter().map(|i| i.outcome.resid_var).sum::<f64>() / mm;
        let between = means.iter().map(|v| (v - pooled).powi(2)).sum::<f64>() / (mm - 1.0).max(1.0);
        PredictiveDistribution::gaussian(pooled, within + (1.0 + 1.0 / mm) * between)
    }
}

pub(crate) fn train_mi(ds: &MaskedDataset, cfg: &ProcedureConfig, indicators: bool) -> Result<MiModel> {
    let n = ds.n();
    let p = ds.p();
    let outcome_binary = ds.outcome_is_binary();
    let binary_cols: Vec<bool> = (0..p).map(|j| column_is_binary(ds, j)).collect();
    let missable: Vec<usize> = (0..p).filter(|&j| ds.x().col_observed_count(j) < n).collect();
    for j in 0..p {
        if ds.x().col_observed_count(j) < 2 {
            return Err(Error::Training(format!("column {} has fewer than 2 observed values", ds.column_names()[j])));
        }
    }
    let y_rows = super::usable_rows(ds);
    if y_rows.len() < 2 {
        return Err(Error::Training("fewer than 2 rows with an observed outcome".into()));
    }
    // columns 0..p are predictors, column p is the outcome
    let mut incomplete: Vec<usize> = missable.clone();
    if y_rows.len() < n {
        incomplete.push(p);
    }
    let observed_count = |c: usize| if c == p { y_rows.len() } else { ds.x().col_observed_count(c) };
    incomplete.sort_by_key(|&c| (std::cmp::Reverse(observed_count(c)), c));
    let is_missing = |i: usize, c: usize| if c == p { !ds.y_observed(i) } else { ds.x().is_missing(i, c) };
    let col_binary = |c: usize| if c == p { outcome_binary } else { binary_cols[c] };
    let cycles = cfg.mi_cycles.unwrap_or(if incomplete.len() <= 1 { 1 } else { 5 });

    let template = MiModel {
        indicators,
        interactions: indicators && cfg.mimi_interactions,
        p,
        missable: missable.clone(),
        binary_cols: binary_cols.clone(),
        outcome_binary,
        mc_draws: cfg.mc_draws,
        seed: cfg.seed,
        imputations: Vec::new(),
    };

    let imputations = crate::exec::map_range(cfg.m_imputations, |k| -> Result<Imputation> {
        let mut rng = seed::derived_rng(cfg.seed, &[seed::label("mi"), k as u64]);
        let mut data: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r: Vec<f64> = (0..p).map(|j| ds.x().opt(i, j).unwrap_or(0.0)).collect();
                r.push(if ds.y_observed(i) { ds.y_at(i).unwrap_or(0.0) } else { 0.0 });
                r
            })
            .collect();
        for &c in &incomplete {
            let pool: Vec<f64> = (0..n).filter(|&i| !is_missing(i, c)).map(|i| data[i][c]).collect();
            for i in 0..n {
                if is_missing(i, c) {
                    data[i][c] = *pool.choose(&mut rng).expect("column has observed values");
                }
            }
        }
        for _ in 0..cycles {
            for &c in &incomplete {
                let fit_idx: Vec<usize> = (0..n).filter(|&i| !is_missing(i, c)).collect();
                let design = |r: &Vec<f64>| -> Vec<f64> {
                    let mut d = vec![1.0];
                    d.extend(r.iter().enumerate().filter(|&(k2, _)| k2 != c).map(|(_, v)| *v));
                    d
                };
                let xs: Vec<Vec<f64>> = fit_idx.iter().map(|&i| design(&data[i])).collect();
                let ys: Vec<f64> = fit_idx.iter().map(|&i| data[i][c]).collect();
                let fit = fit_rows(&xs, &ys, col_binary(c))
                    .map_err(|e| Error::Training(format!("imputation model for column {c}: {e}")))?;
                let drawn = fit.draw(&mut rng);
                for i in 0..n {
                    if is_missing(i, c) {
                        let d = design(&data[i]);
                        data[i][c] = drawn.sample(&d, &mut rng);
                    }
                }
            }
        }
        let masks: Vec<&[bool]> = (0..n).map(|i| ds.x().row_mask(i)).collect();
        let mut buf = Vec::new();
        let mut xs = Vec::with_capacity(y_rows.len());
        let mut ys = Vec::with_capacity(y_rows.len());
        for &i in &y_rows {
            template.outcome_row(&data[i][..p], masks[i], &mut buf);
            xs.push(buf.clone());
            ys.push(data[i][p]);
        }
        let outcome = fit_rows(&xs, &ys, outcome_binary)
            .map_err(|e| Error::Training(format!("outcome model: {e}")))?
            .summary();
        let targets: Vec<usize> = if indicators { missable.clone() } else { (0..p).collect() };
        let mut imputers = vec![None; p];
        for j in targets {
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for i in 0..n {
                template.imputer_row(j, &data[i][..p], masks[i], &mut buf);
                xs.push(buf.clone());
                ys.push(data[i][j]);
            }
            match fit_rows(&xs, &ys, binary_cols[j]) {
                Ok(f) => imputers[j] = Some(f.summary()),
                Err(e) if !missable.contains(&j) => {
                    log::debug!("no deployment imputer for always-observed column {j}: {e}");
                }
                Err(e) => return Err(Error::Training(format!("deployment imputation model for column {j}: {e}"))),
            }
        }
        Ok(Imputation { outcome, imputers })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(MiModel { imputations, ..template })
}
